# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

"""Plain-text POMDP interchange format.

The writer emits the classic header (``discount``, ``values``, ``states``,
``actions``, ``observations``, ``start``) followed by sparse entries::

    T: <action> : <state> : <next state> <probability>
    O: <action> : <next state> : <observation> <probability>
    R: <action> : <state> : * : * <reward>

Failure and terminal states and per-state features travel in ``#!``
comment directives, which other readers ignore.
"""

import numpy as np
import scipy.sparse as sp

from pyimplan.base_utils import console_logger, InterchangeParseError
from pyimplan.pomdp_core import BeliefState, DiscretePomdp

logger = console_logger("INTERCHANGE")


def _num(value):
    # shortest text that reads back to the same double
    return repr(float(value))


def _names(labels, count):
    return " ".join(labels) if labels else str(count)


def export_interchange(model):
    """Serialize `model` to interchange text.

    :param model: POMDP to write.
    :type model: class:`pyimplan.pomdp_core.DiscretePomdp`
    :rtype: str
    """
    lines = ["# pyimplan POMDP export",
             "discount: %s" % _num(model.discount),
             "values: reward",
             "states: %s" % _names(model.state_names, model.num_states),
             "actions: %s" % _names(model.action_names, model.num_actions),
             "observations: %s" % _names(model.observation_names,
                                         model.num_observations),
             "start: %s" % " ".join(_num(p) for p in
                                    model.initial_belief.probs)]
    if model.failure_states.size:
        lines.append("#! failure: %s" % " ".join(
            str(s) for s in model.failure_states))
    if model.terminal_states.size:
        lines.append("#! terminal: %s" % " ".join(
            str(s) for s in model.terminal_states))
    for name, values in sorted(model.state_features.items()):
        lines.append("#! feature %s: %s" % (name, " ".join(
            _num(v) for v in values)))
    lines.append("")

    for a, matrix in enumerate(model.transition):
        coo = matrix.tocoo()
        for s, t, p in zip(coo.row, coo.col, coo.data):
            if p:
                lines.append("T: %d : %d : %d %s" % (a, s, t, _num(p)))
    for a, matrix in enumerate(model.observation):
        coo = matrix.tocoo()
        for s, o, p in zip(coo.row, coo.col, coo.data):
            if p:
                lines.append("O: %d : %d : %d %s" % (a, s, o, _num(p)))
    for a in range(model.num_actions):
        for s in np.flatnonzero(model.reward[a]):
            lines.append("R: %d : %d : * : * %s"
                         % (a, s, _num(model.reward[a, s])))
    return "\n".join(lines) + "\n"


def write_interchange(model, path):
    with open(path, "w") as fp:
        fp.write(export_interchange(model))
    logger.info("Wrote %d-state model to %s" % (model.num_states, path))
    return path


class _Reader(object):
    def __init__(self, text):
        self.header = {}
        self.labels = {}
        self.directives = {}
        self.features = {}
        self.entries = {"T": {}, "O": {}, "R": {}}
        self.text = text

    def _count(self, key, lineno, value):
        tokens = value.split()
        if not tokens:
            raise InterchangeParseError(lineno, "empty %s declaration" % key)
        if len(tokens) == 1 and tokens[0].isdigit():
            self.header[key] = int(tokens[0])
            self.labels[key] = None
        else:
            self.header[key] = len(tokens)
            self.labels[key] = tokens

    def _index(self, key, token, lineno):
        if token == "*":
            return None
        if token.isdigit():
            index = int(token)
        elif self.labels.get(key) and token in self.labels[key]:
            index = self.labels[key].index(token)
        else:
            raise InterchangeParseError(lineno, "unknown %s %r"
                                        % (key[:-1], token))
        if not 0 <= index < self.header[key]:
            raise InterchangeParseError(lineno, "%s index %d out of range"
                                        % (key[:-1], index))
        return index

    def _expand(self, key, token, lineno):
        index = self._index(key, token, lineno)
        return range(self.header[key]) if index is None else [index]

    def _entry(self, kind, body, lineno):
        fields = [f.strip() for f in body.split(":")]
        if kind == "R":
            if len(fields) != 4:
                raise InterchangeParseError(lineno, "expected R: a : s : s' "
                                            ": o value")
            tail = fields[3].split()
            if fields[2] != "*" or len(tail) != 2 or tail[0] != "*":
                raise InterchangeParseError(
                    lineno, "rewards must not depend on the next state or "
                    "the observation")
            keys = [("actions", fields[0]), ("states", fields[1])]
            value = tail[1]
        else:
            if len(fields) != 3:
                raise InterchangeParseError(lineno, "expected %s: a : x : y "
                                            "value" % kind)
            tail = fields[2].split()
            if len(tail) != 2:
                raise InterchangeParseError(lineno, "expected one target and "
                                            "one value")
            last = "states" if kind == "T" else "observations"
            keys = [("actions", fields[0]),
                    ("states", fields[1]), (last, tail[0])]
            value = tail[1]
        try:
            value = float(value)
        except ValueError:
            raise InterchangeParseError(lineno, "bad number %r" % value)
        ranges = [self._expand(key, token, lineno) for key, token in keys]
        table = self.entries[kind]
        for a in ranges[0]:
            for s in ranges[1]:
                if kind == "R":
                    table[(a, s)] = value
                else:
                    for t in ranges[2]:
                        table[(a, s, t)] = value

    def _directive(self, body, lineno):
        name, _, values = body.partition(":")
        name = name.strip()
        try:
            if name.startswith("feature "):
                self.features[name[len("feature "):].strip()] = [
                    float(v) for v in values.split()]
            else:
                self.directives[name] = [int(v) for v in values.split()]
        except ValueError:
            raise InterchangeParseError(lineno, "bad directive %r" % name)

    def parse(self):
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.strip()
            if line.startswith("#!"):
                self._directive(line[2:], lineno)
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition(":")
            key = key.strip()
            if not sep:
                raise InterchangeParseError(lineno, "missing ':'")
            if key in ("states", "actions", "observations"):
                self._count(key, lineno, value)
            elif key in ("discount", "values", "start"):
                self.header[key] = (value.strip(), lineno)
            elif key in ("T", "O", "R"):
                missing = [k for k in ("states", "actions", "observations")
                           if k not in self.header]
                if missing:
                    raise InterchangeParseError(
                        lineno, "%s entry before the %s declaration"
                        % (key, missing[0]))
                self._entry(key, value, lineno)
            else:
                raise InterchangeParseError(lineno, "unknown keyword %r"
                                            % key)
        return self

    def _matrices(self, kind, width):
        S, A = self.header["states"], self.header["actions"]
        rows = [[] for _ in range(A)]
        for (a, s, t), value in self.entries[kind].items():
            rows[a].append((s, t, value))
        matrices = []
        for a in range(A):
            if rows[a]:
                s, t, v = zip(*rows[a])
                matrices.append(sp.csr_matrix((v, (s, t)), shape=(S, width)))
            else:
                matrices.append(sp.csr_matrix((S, width)))
        return tuple(matrices)

    def model(self):
        for key in ("states", "actions", "observations", "discount"):
            if key not in self.header:
                raise InterchangeParseError(0, "missing %s declaration"
                                            % key)
        S, A = self.header["states"], self.header["actions"]
        discount, lineno = self.header["discount"]
        try:
            discount = float(discount)
        except ValueError:
            raise InterchangeParseError(lineno, "bad discount %r" % discount)
        sign = 1.0
        if "values" in self.header:
            kind, lineno = self.header["values"]
            if kind not in ("reward", "cost"):
                raise InterchangeParseError(lineno, "values must be reward "
                                            "or cost")
            sign = -1.0 if kind == "cost" else 1.0

        start = np.full(S, 1.0 / S)
        if "start" in self.header:
            value, lineno = self.header["start"]
            if value != "uniform":
                try:
                    start = np.array([float(v) for v in value.split()])
                except ValueError:
                    raise InterchangeParseError(lineno, "bad start belief")
                if start.size != S:
                    raise InterchangeParseError(
                        lineno, "start has %d entries for %d states"
                        % (start.size, S))

        reward = np.zeros((A, S))
        for (a, s), value in self.entries["R"].items():
            reward[a, s] = sign * value
        return DiscretePomdp(
            S, A, self.header["observations"],
            self._matrices("T", S),
            self._matrices("O", self.header["observations"]),
            reward, discount, BeliefState(start),
            failure_states=self.directives.get("failure", []),
            terminal_states=self.directives.get("terminal", []),
            state_names=self.labels.get("states"),
            action_names=self.labels.get("actions"),
            observation_names=self.labels.get("observations"),
            state_features={k: np.array(v) for k, v in
                            self.features.items() if len(v) == S})


def import_interchange(text):
    """Parse interchange text into a DiscretePomdp.

    :raises InterchangeParseError: Malformed document; carries the line.
    :rtype: class:`pyimplan.pomdp_core.DiscretePomdp`
    """
    return _Reader(text).parse().model()


def read_interchange(path):
    with open(path) as fp:
        return import_interchange(fp.read())
