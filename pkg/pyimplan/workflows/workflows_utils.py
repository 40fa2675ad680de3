# MIT License
#
# Copyright (c) 2024 pyimplan contributors
#
# Licensed under the MIT License. See LICENSE in the project root.

import os
import json
import csv

import yaml

from pyimplan.base_utils import ConfigError


def get_file_contents(filename, logger=None):
    """Function to open a JSON/YAML/CSV file and return the contents of the\
        file in dict format. (A list of dict is returned for a CSV file.)

    :param filename: Name of an existing JSON/YAML/CSV file.
    :type filename: str
    :param logger: Provide an instance of class:`logging.logger`.
    :type logger: class:`logging.logger`, optional
    :return: Data loaded from JSON/YAML/CSV file, None when the file is\
        missing or unreadable.
    :rtype: dict (a list of dict for CSV)
    """
    _, file_ext = os.path.splitext(filename)
    try:
        with open(filename, "r") as fp:
            if file_ext == ".json":
                return json.load(fp)
            if file_ext in [".yaml", ".yml"]:
                return yaml.safe_load(fp)
            if file_ext == ".csv":
                return list(csv.DictReader(fp))
        raise UserWarning("Provide valid file with "
                          "format/extension [.json/.yaml/.yml/.csv]!")
    except FileNotFoundError:
        if logger:
            logger.error("File %s not found.." % filename)
    except Exception as err:
        if logger:
            logger.error("Error reading file %s: %s" % (filename, str(err)))
    return None


def _columns(rows):
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def dict_list_to_csv(filename, csv_data_list, logger=None):
    """Write list of dictionaries into a CSV File via csv.DictWriter().\
        Columns are the union of the row keys in first-seen order.

    :param filename: Name of the file to be created or overwritten
    :type filename: str
    :param csv_data_list: A list of dictionaries, where each dict is a row in\
        CSV file
    :type csv_data_list: list
    :param logger: Provide an instance of class:`logging.logger`.
    :type logger: class:`logging.logger`, optional
    :return: `filename`, or None when there was nothing to write.
    :rtype: str
    """
    if not csv_data_list or not csv_data_list[0]:
        if logger:
            logger.warning("No data to write to %s" % filename)
        return None
    directory = os.path.dirname(filename)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(filename, "w", newline="") as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=_columns(csv_data_list),
                                restval="")
        writer.writeheader()
        for data in csv_data_list:
            writer.writerow(data)
    if logger:
        logger.info("Wrote %d rows to %s" % (len(csv_data_list), filename))
    return filename


def dict_to_yaml(filename, data, logger=None):
    """Dump `data` to a YAML file, creating the parent directory."""
    directory = os.path.dirname(filename)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(filename, "w") as fp:
        yaml.safe_dump(data, fp, default_flow_style=False, sort_keys=True)
    if logger:
        logger.debug("Wrote %s" % filename)
    return filename


def get_experiment_from_file(filename, logger=None, overrides=None):
    """Creates an instance of class`pyimplan.base.ImPlanningBase` based on\
        the information provided in the YAML/JSON file. \n
        * keyword experiment_info: A dict containing arguments as accepted\
            by class`pyimplan.base.ImPlanningBase` \n

    :param filename: Name of a JSON/YAML file with an `experiment_info`\
        section.
    :type filename: str
    :param logger: Provide an instance of class:`logging.logger`, defaults to\
        logger class with name "IMPLAN_BASE".
    :type logger: class:`logging.logger`, optional
    :param overrides: Keys laid over `experiment_info`, e.g. a seed or run\
        directory from the command line.
    :type overrides: dict, optional
    :raises ConfigError: File missing, unreadable or without\
        `experiment_info`.
    :return: An experiment session.
    :rtype: class:`pyimplan.base.ImPlanningBase`
    """
    from pyimplan.base import ImPlanningBase

    input_args = get_file_contents(filename=filename, logger=logger)
    if not input_args:
        raise ConfigError("Unable to get the content of %s" % filename)
    if not isinstance(input_args, dict) or "experiment_info" not in input_args:
        raise ConfigError("Provide experiment_info in the file %s"
                          % filename)
    experiment_info = dict(input_args["experiment_info"] or {})
    experiment_info.update(overrides or {})
    return ImPlanningBase(experiment_info=experiment_info, logger=logger)
