import os
import sys
import copy
import yaml
import argparse

from typing import Dict, Optional, Sequence


CONFIG_DIR = os.path.abspath(os.path.dirname(__file__))

# Types nameable in YAML for arguments whose default is null.
_TYPES = {"int": int, "float": float, "str": str}


def _get_config(config_name: str):
    config_file = os.path.join(CONFIG_DIR, f"{config_name}.yaml")
    with open(config_file, "r") as f:
        return yaml.load(f, Loader=yaml.SafeLoader) or {}


def list_of(element_type: type):
    """
    Returns an argparse type that splits a comma-separated
    string into a list of `element_type`.
    """
    def parse(value):
        if isinstance(value, (list, tuple)):
            return [element_type(v) for v in value]
        return [element_type(v) for v in str(value).split(",") if v.strip()]
    parse.__name__ = f"list_of_{element_type.__name__}"
    return parse


def get_config_parser(config_name: str, parent: argparse.ArgumentParser = None):
    """
    Builds an argument parser from the YAML file `config_name`,
    inheriting the arguments of `parent` if given.
    """
    config = _get_config(config_name)
    parents = [parent] if parent else []
    parser = argparse.ArgumentParser(
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        parents=parents,
        add_help=(parent is None),
        conflict_handler="resolve",
    )
    for argument, argument_config in config.items():
        argument_config = dict(argument_config or {})
        if isinstance(argument_config.get("type"), str):
            argument_config["type"] = _TYPES[argument_config["type"]]
        if parent is not None:
            matches = [
                a for a in parent._actions
                if a.option_strings and argument == a.option_strings[0][2:]]
            if len(matches) == 1:
                match = matches[0]
                for attr in ("help", "choices"):
                    if attr not in argument_config and getattr(match, attr, None) is not None:
                        argument_config[attr] = getattr(match, attr)
        parser.add_argument(
            "--" + argument,
            required="default" not in argument_config,
            **argument_config,
        )
    parser.defaults = argparse.Namespace(**{
        action.dest: parser.get_default(action.dest)
        for action in parser._actions
        if action.option_strings and action.dest != "help"
    })
    parser.choices = argparse.Namespace(**{
        action.dest: action.choices
        for action in parser._actions
        if action.choices is not None
    })
    for action in parser._actions:
        if action.type is None and action.dest in config and action.nargs != 0:
            if isinstance(action.default, list):
                action.type = list_of(type(action.default[0]) if action.default else str)
            elif action.default is not None:
                action.type = type(action.default)
            elif action.choices is not None:
                action.type = type(next(iter(action.choices)))
    return parser


def get_presets() -> Dict[str, dict]:
    """
    Returns the named hyperparameter presets.
    """
    return _get_config("presets")


def read_flat_config(path: str) -> Dict[str, object]:
    """
    Reads a flat configuration file of `key: value` or `key=value` lines.
    Blank lines and `#` comments are ignored.
    """
    values = {}
    with open(path, "r") as f:
        for number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            separator = "=" if "=" in line else ":"
            if separator not in line:
                raise ValueError(f"{path}:{number}: expected `key=value`, got {line!r}")
            key, value = (part.strip() for part in line.split(separator, 1))
            values[key] = yaml.safe_load(value) if value else None
    return values


def parse_run_config(parser: argparse.ArgumentParser, argv: Optional[Sequence[str]] = None):
    """
    Parses `argv` with `parser`, layering defaults in the order
    YAML < preset < config file < command-line flags.
    """
    parser = copy.deepcopy(parser)
    argv = list(sys.argv[1:] if argv is None else argv)
    pre, _ = base.parse_known_args([a for a in argv if a not in ("-h", "--help")])
    overrides = {}
    if pre.preset:
        presets = get_presets()
        if pre.preset not in presets:
            parser.error(f"unknown preset {pre.preset!r}; choose from {sorted(presets)}")
        overrides.update(presets[pre.preset])
    if pre.config:
        try:
            overrides.update(read_flat_config(pre.config))
        except (OSError, ValueError) as e:
            parser.error(str(e))
    known = {a.dest: a for a in parser._actions if a.option_strings}
    unknown = sorted(set(overrides) - set(known))
    if unknown:
        parser.error(f"unknown configuration keys: {unknown}")
    for key, value in overrides.items():
        action = known[key]
        if action.type is not None and value is not None:
            value = action.type(value)
        parser.set_defaults(**{key: value})
        # Values supplied by a preset or file satisfy `required`.
        action.required = False
    return parser.parse_args(argv)


base = get_config_parser("base")
xor = get_config_parser("xor", parent=base)
capacity = get_config_parser("capacity", parent=base)
train = get_config_parser("train", parent=base)
evaluate = get_config_parser("evaluate", parent=base)
analyze = get_config_parser("analyze", parent=base)
