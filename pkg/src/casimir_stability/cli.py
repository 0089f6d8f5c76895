"""Command-line interface: declarative configs in, deterministic CSV out.

Subcommands
-----------
classify    material class of every object and pairwise sign products
energy      interaction energy at tau = 0 or finite tau
force       force vector on one object
stability   full stability report (force, Laplacian, decomposition)
sweep       energy/force along a displacement sweep of one object
plates      parallel half-space (Lifshitz) energy per area
mc          classical fluctuating-charge Laplacian estimator

Exit codes: 0 success, 2 validation error, 3 convergence-budget or
precision error, 4 unphysical truncation.  All errors are also written as
one JSON diagnostic object per line on stderr.

Outputs are CSV (UTF-8, '\\n' newlines, header row, 17 significant digits)
preceded by a comment line echoing the length unit; identical config and
seed give byte-identical output.
"""

import argparse
import csv
import io
import json
import sys

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from . import classical as cl
from .casimir import Configuration, energy_T0, free_energy_T, lifshitz_plates
from .errors import (
    ConvergenceBudgetError,
    PrecisionError,
    UnphysicalTruncationError,
    ValidationError,
)
from .materials import DispersionModel, Medium, classify
from .scattering import SphereObject
from .stability import force as force_on
from .stability import stability_report

__all__ = ["main", "run", "emit_csv"]

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["constant", "plasma", "drude", "lorentz", "pec"]},
        "value": {"type": "number", "exclusiveMinimum": 0},
        "omega_p": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "minimum": 0},
        "oscillators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "minItems": 3,
                "maxItems": 3,
                "items": {"type": "number"},
            },
        },
    },
}

_VEC3 = {
    "type": "array",
    "minItems": 3,
    "maxItems": 3,
    "items": {"type": "number"},
}

_OBJECT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["label", "center", "radius", "eps"],
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "center": _VEC3,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "eps": _MODEL_SCHEMA,
        "mu": _MODEL_SCHEMA,
    },
}

_CHARGE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["charge"],
    "properties": {
        "charge": {"type": "number"},
        "position": _VEC3,
        "tether": {
            "type": "object",
            "additionalProperties": False,
            "required": ["k"],
            "properties": {"k": {"type": "number", "minimum": 0}, "anchor": _VEC3},
        },
    },
}

_CONTAINER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["label", "shape", "center", "size"],
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "shape": {"enum": ["sphere", "box"]},
        "center": _VEC3,
        "size": {
            "anyOf": [{"type": "number", "exclusiveMinimum": 0}, _VEC3]
        },
        "fixed_charges": {"type": "array", "items": _CHARGE_SCHEMA},
        "mobile_charges": {"type": "array", "items": _CHARGE_SCHEMA},
        "include_intra": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "length_unit": {"type": "string"},
        "medium": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"eps": _MODEL_SCHEMA, "mu": _MODEL_SCHEMA},
        },
        "tau": {"type": "number", "minimum": 0},
        "objects": {"type": "array", "minItems": 1, "items": _OBJECT_SCHEMA},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "l_max": {"type": "integer", "minimum": 1},
        "n_nodes": {"type": "integer", "minimum": 4},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "stability": {
            "type": "object",
            "additionalProperties": False,
            "required": ["object"],
            "properties": {
                "object": {"type": "string"},
                "h": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["object", "axis", "values"],
            "properties": {
                "object": {"type": "string"},
                "axis": {"type": "integer", "minimum": 0, "maximum": 2},
                "values": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number"},
                },
                "quantity": {"enum": ["energy", "force", "both"]},
            },
        },
        "plates": {
            "type": "object",
            "additionalProperties": False,
            "required": ["material1", "material2", "gap"],
            "properties": {
                "material1": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["eps"],
                    "properties": {"eps": _MODEL_SCHEMA, "mu": _MODEL_SCHEMA},
                },
                "material2": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["eps"],
                    "properties": {"eps": _MODEL_SCHEMA, "mu": _MODEL_SCHEMA},
                },
                "gap": {"type": "number", "exclusiveMinimum": 0},
                "tau": {"type": "number", "minimum": 0},
            },
        },
        "classical": {
            "type": "object",
            "additionalProperties": False,
            "required": ["containers", "label"],
            "properties": {
                "containers": {
                    "type": "array",
                    "minItems": 2,
                    "items": _CONTAINER_SCHEMA,
                },
                "eps_M": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "label": {"type": "string"},
                "steps": {"type": "integer", "minimum": 2},
                "step_size": {"type": "number", "exclusiveMinimum": 0},
                "burn_in": {"type": "integer", "minimum": 1},
            },
        },
    },
}


def _build_model(node):
    kind = node["type"]
    if kind == "constant":
        return DispersionModel.constant(node["value"])
    if kind == "plasma":
        return DispersionModel.plasma(node["omega_p"])
    if kind == "drude":
        return DispersionModel.drude(node["omega_p"], node["gamma"])
    if kind == "lorentz":
        return DispersionModel.lorentz([tuple(o) for o in node["oscillators"]])
    return DispersionModel.perfect_conductor()


def _build_medium(cfg):
    node = cfg.get("medium", {})
    medium = Medium()
    if "eps" in node:
        medium = Medium(eps_model=_build_model(node["eps"]), mu_model=medium.mu_model)
    if "mu" in node:
        medium = Medium(eps_model=medium.eps_model, mu_model=_build_model(node["mu"]))
    return medium


def _build_configuration(cfg):
    if "objects" not in cfg or len(cfg["objects"]) < 2:
        raise ValidationError("at least two objects are required")
    objects = []
    for node in cfg["objects"]:
        mu = _build_model(node["mu"]) if "mu" in node else DispersionModel.constant(1.0)
        objects.append(
            SphereObject(
                center=tuple(node["center"]),
                radius=node["radius"],
                eps=_build_model(node["eps"]),
                mu=mu,
                label=node["label"],
            )
        )
    return Configuration(tuple(objects), _build_medium(cfg), cfg.get("tau", 0.0))


def _build_classical(cfg):
    node = cfg.get("classical")
    if node is None:
        raise ValidationError("the 'mc' subcommand requires a 'classical' section")
    containers = []
    for c in node["containers"]:
        fixed = tuple(
            (ch["charge"], tuple(ch.get("position", (0, 0, 0))))
            for ch in c.get("fixed_charges", [])
        )
        mobiles = []
        for ch in c.get("mobile_charges", []):
            tether = None
            if "tether" in ch:
                tether = (
                    "harmonic",
                    ch["tether"]["k"],
                    tuple(ch["tether"].get("anchor", (0, 0, 0))),
                )
            mobiles.append((ch["charge"], tether))
        containers.append(
            cl.Container(
                label=c["label"],
                shape=c["shape"],
                center=tuple(c["center"]),
                size=c["size"],
                fixed_charges=fixed,
                mobile_charges=tuple(mobiles),
                include_intra=c.get("include_intra", False),
            )
        )
    config = cl.ClassicalConfig(
        tuple(containers), node.get("eps_M", 1.0), node.get("beta", 1.0)
    )
    return config, node


def _fmt(value):
    if isinstance(value, float) or isinstance(value, np.floating):
        v = float(value)
        if v == 0.0:
            v = 0.0  # normalize negative zero
        return format(v, ".17g")
    if value is None:
        return ""
    return str(value)


def emit_csv(header, rows, path, length_unit="1 (hbar = c = 1)"):
    """Write deterministic CSV: comment with the length unit, header, rows."""
    buf = io.StringIO()
    buf.write(f"# length_unit: {length_unit}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    data = buf.getvalue()
    if path is None:
        sys.stdout.write(data)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    except OSError as exc:
        raise ValidationError(f"cannot write output file {path!r}: {exc}") from exc


def _cmd_classify(cfg, args):
    config = _build_configuration(cfg)
    gap = config.min_gap()
    samples = [0.5 / gap, 1.0 / gap, 2.0 / gap, 8.0 / gap]
    rows = []
    classes = {}
    for o in config.objects:
        c = classify(o.eps, o.mu, config.medium, samples)
        classes[o.label] = c
        rows.append(["class", o.label, c.variant])
        rows.append(["sign", o.label, c.sign if c.sign is not None else ""])
    labels = [o.label for o in config.objects]
    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            sa, sb = classes[a].sign, classes[b].sign
            product = sa * sb if sa not in (None, 0) and sb not in (None, 0) else None
            rows.append(["sign_product", f"{a}|{b}", product])
    return ["record", "label", "value"], rows


def _cmd_energy(cfg, args):
    config = _build_configuration(cfg)
    tol = args.tol if args.tol is not None else cfg.get("tolerance", 1e-6)
    l_max = args.lmax if args.lmax is not None else cfg.get("l_max")
    if config.tau == 0.0:
        result = energy_T0(config, tol=tol, l_max=l_max)
    else:
        result = free_energy_T(config, tol=tol, l_max=l_max)
    return (
        ["tau", "energy", "l_max", "nodes", "est_rel_error", "kappa_floor_used"],
        [
            [
                config.tau,
                result.value,
                result.l_max_used,
                result.node_count,
                result.est_rel_error,
                int(result.kappa_floor_used),
            ]
        ],
    )


def _stability_target(cfg, config):
    node = cfg.get("stability")
    if node is not None:
        return node["object"], node.get("h")
    return config.objects[0].label, None


def _cmd_force(cfg, args):
    config = _build_configuration(cfg)
    label, h = _stability_target(cfg, config)
    l_max = args.lmax if args.lmax is not None else cfg.get("l_max")
    f = force_on(config, label, h=h, l_max=l_max, n_nodes=cfg.get("n_nodes", 32))
    return ["object", "fx", "fy", "fz"], [[label, f[0], f[1], f[2]]]


def _cmd_stability(cfg, args):
    config = _build_configuration(cfg)
    label, h = _stability_target(cfg, config)
    l_max = args.lmax if args.lmax is not None else cfg.get("l_max")
    rep = stability_report(
        config, label, h=h, l_max=l_max, n_nodes=cfg.get("n_nodes", 32)
    )
    header = [
        "object",
        "fx",
        "fy",
        "fz",
        "laplacian",
        "term1",
        "term2",
        "term3",
        "predicted_sign_product",
        "h_used",
        "est_error",
    ]
    row = [
        rep.object_label,
        rep.force[0],
        rep.force[1],
        rep.force[2],
        rep.laplacian,
        rep.term1,
        rep.term2,
        rep.term3,
        rep.predicted_sign_product,
        rep.h_used,
        rep.est_error,
    ]
    return header, [row]


def _cmd_sweep(cfg, args):
    config = _build_configuration(cfg)
    node = cfg.get("sweep")
    if node is None:
        raise ValidationError("the 'sweep' subcommand requires a 'sweep' section")
    label, axis = node["object"], node["axis"]
    quantity = node.get("quantity", "energy")
    tol = args.tol if args.tol is not None else cfg.get("tolerance", 1e-6)
    l_max = args.lmax if args.lmax is not None else cfg.get("l_max")
    from .stability import _with_displacement

    rows = []
    for value in node["values"]:
        moved = _with_displacement(config, label, axis, value)
        row = [value]
        if quantity in ("energy", "both"):
            if moved.tau == 0.0:
                row.append(energy_T0(moved, tol=tol, l_max=l_max).value)
            else:
                row.append(free_energy_T(moved, tol=tol, l_max=l_max).value)
        if quantity in ("force", "both"):
            f = force_on(
                moved, label, l_max=l_max, n_nodes=cfg.get("n_nodes", 32)
            )
            row.append(f[axis])
        rows.append(row)
    header = ["displacement"]
    if quantity in ("energy", "both"):
        header.append("energy")
    if quantity in ("force", "both"):
        header.append("force_axis")
    return header, rows


def _cmd_plates(cfg, args):
    node = cfg.get("plates")
    if node is None:
        raise ValidationError("the 'plates' subcommand requires a 'plates' section")
    medium = _build_medium(cfg)

    def half_space(sub):
        mu = _build_model(sub["mu"]) if "mu" in sub else DispersionModel.constant(1.0)
        return (_build_model(sub["eps"]), mu)

    tol = args.tol if args.tol is not None else cfg.get("tolerance", 1e-8)
    tau = node.get("tau", 0.0)
    value = lifshitz_plates(
        half_space(node["material1"]),
        half_space(node["material2"]),
        medium,
        node["gap"],
        tau=tau,
        tol=tol,
    )
    return ["gap", "tau", "energy_per_area"], [[node["gap"], tau, value]]


def _cmd_mc(cfg, args):
    config, node = _build_classical(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    stream = cl.metropolis_run(
        config,
        node.get("steps", 200000),
        node.get("step_size", 0.2),
        seed,
        burn_in=node.get("burn_in"),
    )
    est = cl.laplacian_F_estimator(config, node["label"], stream)
    header = [
        "label",
        "mean",
        "stderr",
        "n_samples",
        "autocorrelation_time",
        "acceptance_rate",
        "seed",
    ]
    row = [
        node["label"],
        est.mean,
        est.stderr,
        est.n_samples,
        est.autocorrelation_time,
        stream.acceptance_rate,
        seed,
    ]
    return header, [row]


_COMMANDS = {
    "classify": _cmd_classify,
    "energy": _cmd_energy,
    "force": _cmd_force,
    "stability": _cmd_stability,
    "sweep": _cmd_sweep,
    "plates": _cmd_plates,
    "mc": _cmd_mc,
}


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config file must contain a mapping at top level")
    errors = sorted(
        Draft202012Validator(CONFIG_SCHEMA).iter_errors(data), key=str
    )
    if errors:
        details = "; ".join(
            f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
            for e in errors[:5]
        )
        raise ValidationError(f"config failed schema validation: {details}")
    return data


def _limit_threads(n):
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        import os

        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _diagnostic(kind, exc):
    sys.stderr.write(
        json.dumps({"error": kind, "message": str(exc)}, sort_keys=True) + "\n"
    )


def run(argv):
    parser = argparse.ArgumentParser(
        prog="casimir-stability",
        description="Casimir energies, forces and stability of sphere collections",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("config", help="YAML configuration file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--lmax", type=int, default=None)
    parser.add_argument("--output", default=None)
    args = parser.parse_args(argv)

    _limit_threads(args.threads)
    try:
        cfg = _load_config(args.config)
        header, rows = _COMMANDS[args.subcommand](cfg, args)
        path = args.output if args.output is not None else cfg.get("output")
        emit_csv(
            header, rows, path, length_unit=cfg.get("length_unit", "1 (hbar = c = 1)")
        )
    except ValidationError as exc:
        _diagnostic("validation", exc)
        return 2
    except (ConvergenceBudgetError, PrecisionError) as exc:
        _diagnostic("convergence_budget", exc)
        return 3
    except UnphysicalTruncationError as exc:
        _diagnostic("unphysical_truncation", exc)
        return 4
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
