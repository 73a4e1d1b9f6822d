"""Batch command-line front end.

One experiment per invocation: load spaces, covering families, operators,
group-ring elements, or presentations; run the requested check; write
deterministic JSON/CSV/gnuplot reports and print the headline value.

Exit codes: 0 success, 2 config error, 3 input error, 4 precondition
violation, 5 numerical non-convergence.  Identical config and seed produce
byte-identical report files: no timestamps, sorted JSON keys, fixed float
repr.  Every JSON summary embeds the tool version, a config hash, and the
seed.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

try:  # pragma: no cover - version shim
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .bandops import (
    BandOperator,
    GroupRingElement,
    NormConvergenceError,
    operator_from_text,
    to_band_operator,
)
from .coverings import (
    CoveringMap,
    faithfulness_report,
    parse_quotient_spec,
    quotient_covering,
    quotient_data,
)
from .groups import FreeGroup, MarkedGroup, cyclic_group
from .lifting import (
    LiftWindow,
    limsup_norm_profile,
    local_multiplicativity_check,
    pushforward_group_ring,
)
from .onl import (
    ControlFunction,
    ONLCertificate,
    amplify_constant,
    lacunary_control_radius,
    onl_constant_floor,
    onl_estimate,
    standard_ensemble,
)
from .quantk import (
    LocalisationPath,
    PartitionOfUnity,
    QuantParams,
    check_quasi_projection,
    check_quasi_unitary,
    index_class_check,
    path_lift_report,
    qs_qi_records,
)
from .smallcancel import (
    LabelledGraph,
    Presentation,
    check_condition,
    compute_pieces,
    schedule_from_graphs,
    schedule_general,
    verify_schedule,
)
from .sobolev import lift_isometry_check, rd_constant_estimate, sobolev_norm
from .spaces import (
    BallSpace,
    CayleySpace,
    Cover,
    FiniteSpace,
    annular_decomposition,
    girth,
    hyperbolicity_delta,
)

ENV_OUTPUT_DIR = "COARSEKIT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "coarsekit_out"


class ConfigError(ValueError):
    """Bad flags, bad config file, or parameter out of declared range."""


class InputError(ValueError):
    """Missing or malformed input file."""


# -- parameter registry -------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # int | float | str | bool | ints | floats | strs | pairs
    default: object = None
    required: bool = False
    help: str = ""
    check: Callable[[object], str | None] | None = None


@dataclass(frozen=True)
class ActionSpec:
    params: tuple[Param, ...]
    handler: Callable[[dict, "ExperimentConfig"], tuple[dict, list[str]]]
    help: str = ""
    needs_seed: bool = False
    post_check: Callable[[dict], None] | None = None


def _check_pos(v) -> str | None:
    return None if v > 0 else "must be positive"


def _check_nonneg(v) -> str | None:
    return None if v >= 0 else "must be >= 0"


def _check_unit(v) -> str | None:
    return None if 0 < v < 1 else "must lie in (0, 1)"


def _check_eps(v) -> str | None:
    return None if 0 < v < 0.25 else "must lie strictly in (0, 1/4)"


def _check_gap(v) -> str | None:
    return None if v > 1 else "must be > 1"


def _convert(param: Param, value) -> object:
    kind = param.kind
    try:
        if kind == "int":
            if isinstance(value, bool):
                raise ValueError("expected an integer")
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "str":
            return str(value)
        if kind == "bool":
            if isinstance(value, bool):
                return value
            text = str(value).lower()
            if text in ("true", "1", "yes"):
                return True
            if text in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {value!r}")
        items = value.split(",") if isinstance(value, str) else list(value)
        if kind == "ints":
            return tuple(int(x) for x in items)
        if kind == "floats":
            return tuple(float(x) for x in items)
        if kind == "strs":
            return tuple(str(x).strip() for x in items)
        if kind == "pairs":
            out = []
            for item in items:
                a, b = str(item).split(":")
                out.append((float(a), float(b)))
            return tuple(out)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"parameter {param.name!r}: {exc}") from None
    raise AssertionError(f"unknown parameter kind {kind!r}")


# -- experiment config --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved parameters for one subcommand run."""

    command: str
    action: str
    params: Mapping[str, object]
    output_dir: Path
    seed: int | None

    def config_hash(self) -> str:
        """Stable digest of everything that shapes the computation.

        The output directory is delivery plumbing and is excluded, so the
        same experiment written to two directories yields identical bytes.
        """
        blob = json.dumps(
            {"command": self.command, "action": self.action,
             "params": {k: self.params[k] for k in sorted(self.params)},
             "seed": self.seed},
            sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def meta(self) -> dict:
        return {"version": __version__, "config_hash": self.config_hash(),
                "seed": self.seed, "command": f"{self.command} {self.action}"}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    if not all(isinstance(k, str) for k in data):
        raise ConfigError("config file keys must be strings")
    return {k.replace("-", "_"): v for k, v in data.items()}


def build_config(ns: argparse.Namespace, file_cfg: Mapping[str, object]
                 ) -> ExperimentConfig:
    """Merge flags over config-file values, validate ranges, freeze."""
    spec = _REGISTRY[ns.command][ns.action]
    known = {p.name for p in spec.params} | {"output_dir", "seed"}
    unknown = sorted(set(file_cfg) - known)
    if unknown:
        raise ConfigError(
            f"unknown config key {unknown[0]!r} for "
            f"'{ns.command} {ns.action}' (known: {', '.join(sorted(known))})")
    params: dict[str, object] = {}
    for prm in spec.params:
        raw = getattr(ns, prm.name, None)
        if raw is None:
            raw = file_cfg.get(prm.name, prm.default)
        if raw is None:
            if prm.required:
                raise ConfigError(
                    f"'{ns.command} {ns.action}' requires --{prm.name.replace('_', '-')}")
            params[prm.name] = None
            continue
        value = _convert(prm, raw)
        if prm.check is not None:
            msg = prm.check(value)
            if msg:
                raise ConfigError(f"parameter {prm.name!r}: {msg}, got {value!r}")
        params[prm.name] = value
    if spec.post_check is not None:
        spec.post_check(params)
    seed = ns.seed if ns.seed is not None else file_cfg.get("seed")
    if seed is not None:
        seed = int(seed)
    if spec.needs_seed and seed is None:
        raise ConfigError(
            f"'{ns.command} {ns.action}' draws a random ensemble; --seed is required")
    out = ns.output_dir or file_cfg.get("output_dir") \
        or os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR
    return ExperimentConfig(command=ns.command, action=ns.action, params=params,
                            output_dir=Path(out), seed=seed)


# -- report emission ----------------------------------------------------------------


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (frozenset, set)):
        return sorted(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _write_atomic(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def emit_report(results: Mapping, output_dir: Path,
                meta: Mapping | None = None) -> list[Path]:
    """Write the JSON summary plus CSV tables and gnuplot .dat series.

    ``results``: {"name": str, "summary": dict, "tables": {stem: (header,
    rows)}, "series": {stem: (header, rows)}, "extra_json": {stem: obj}}.
    Field ordering is stable (sorted JSON keys, caller-ordered rows) and
    writes are atomic.
    """
    if not results or not results.get("summary"):
        raise ValueError("empty results: nothing to report")
    name = results.get("name")
    if not name:
        raise ValueError("results need a report name")
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {output_dir}: {exc}") from None
    summary = dict(results["summary"])
    if meta is not None:
        summary["meta"] = dict(meta)
    written: list[Path] = []

    def _put(fname: str, data: str) -> None:
        path = output_dir / fname
        try:
            _write_atomic(path, data)
        except OSError as exc:
            raise InputError(f"unwritable output directory {output_dir}: {exc}") from None
        written.append(path)

    _put(f"{name}.json",
         json.dumps(summary, sort_keys=True, indent=2, default=_json_default) + "\n")
    for stem, (header, rows) in results.get("tables", {}).items():
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        _put(f"{stem}.csv", buf.getvalue())
    for stem, (header, rows) in results.get("series", {}).items():
        lines = ["# " + " ".join(str(h) for h in header)]
        lines.extend(" ".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) for row in rows)
        _put(f"{stem}.dat", "\n".join(lines) + "\n")
    for stem, obj in results.get("extra_json", {}).items():
        _put(f"{stem}.json",
             json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")
    return written


# -- input loading ------------------------------------------------------------------


def _load_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _load_json(path: str):
    try:
        return json.loads(_load_text(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None


def _cyclic_marking(n: int) -> MarkedGroup:
    gens = [1] if n == 2 else [1, n - 1]
    return MarkedGroup(cyclic_group(n), gens)


def parse_space_spec(spec: str) -> FiniteSpace:
    """Inline spec (cycle:N, path:N, cayley:N) or a space JSON file."""
    head, _, tail = spec.partition(":")
    if head in ("cycle", "path", "cayley"):
        try:
            n = int(tail)
        except ValueError:
            raise ConfigError(f"bad space spec {spec!r}: expected {head}:<int>") from None
        if head == "cycle":
            return FiniteSpace.cycle(n)
        if head == "path":
            return FiniteSpace.path(n)
        return CayleySpace(_cyclic_marking(n))
    try:
        return FiniteSpace.from_json(_load_text(spec))
    except ValueError as exc:
        raise InputError(f"malformed space file {spec}: {exc}") from None


def _source_rank(spec: str) -> int:
    if spec == "z":
        return 1
    head, _, tail = spec.partition(":")
    if head == "free":
        try:
            rank = int(tail)
        except ValueError:
            raise ConfigError(f"bad source spec {spec!r}") from None
        if rank < 1:
            raise ConfigError(f"source rank must be >= 1, got {rank}")
        return rank
    raise ConfigError(f"unknown source spec {spec!r} (use z or free:<rank>)")


def _target_quotient(spec: str, rank: int):
    head, _, tail = spec.partition(":")
    if head == "cyclic":
        try:
            n = int(tail)
        except ValueError:
            raise ConfigError(f"bad target spec {spec!r}: expected cyclic:<int>") from None
        if n < 2:
            raise ConfigError(f"cyclic target needs n >= 2, got {n}")
        if rank != 1:
            raise ConfigError(
                f"cyclic target expects a rank-1 source, got rank {rank}")
        return n, quotient_data(FreeGroup(1), cyclic_group(n), [1])
    try:
        qd = parse_quotient_spec(_load_text(spec))
    except ValueError as exc:
        raise InputError(f"malformed quotient spec {spec}: {exc}") from None
    if qd.free.rank != rank:
        raise ConfigError(
            f"quotient spec {spec} has rank {qd.free.rank}, source has rank {rank}")
    return None, qd


def build_covering_family(source: str, targets: Sequence[str],
                          ball: int | None) -> list[CoveringMap]:
    """Covering maps from one shared free-group ball onto each target."""
    rank = _source_rank(source)
    quotients = [_target_quotient(t, rank) for t in targets]
    if ball is None:
        sizes = [n for n, _ in quotients if n is not None]
        if len(sizes) < len(quotients):
            raise ConfigError("--ball is required with file-based quotient targets")
        ball = max(sizes)
    src = BallSpace(FreeGroup(rank), ball)
    return [quotient_covering(src, qd) for _, qd in quotients]


def _marking_from_spec(spec) -> FreeGroup | MarkedGroup:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InputError("element file needs a marking object with a 'kind'")
    if spec["kind"] == "free":
        return FreeGroup(int(spec.get("rank", 1)))
    if spec["kind"] == "cyclic":
        n = int(spec["n"])
        gens = spec.get("generators")
        return MarkedGroup(cyclic_group(n), gens) if gens else _cyclic_marking(n)
    raise InputError(f"unknown marking kind {spec['kind']!r}")


def load_element(path: str) -> GroupRingElement:
    """Group-ring element file: {"marking": {...}, "coeffs": [{g, re, im}]}."""
    blob = _load_json(path)
    if not isinstance(blob, dict):
        raise InputError(f"element file {path} must hold a JSON object")
    try:
        marking = _marking_from_spec(blob.get("marking"))
        coeffs: dict = {}
        for item in blob.get("coeffs", []):
            g = item["g"]
            g = tuple(int(x) for x in g) if isinstance(g, list) else int(g)
            z = complex(float(item.get("re", 0.0)), float(item.get("im", 0.0)))
            coeffs[g] = coeffs.get(g, 0j) + z
        return GroupRingElement(marking, coeffs)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed element file {path}: {exc}") from None


def _load_operator(path: str, space: FiniteSpace) -> BandOperator:
    try:
        return operator_from_text(_load_text(path), space)
    except ValueError as exc:
        raise InputError(f"malformed operator file {path}: {exc}") from None


def _random_ring_element(free: FreeGroup, radius: int,
                         rng: np.random.Generator) -> GroupRingElement:
    words = free.ball_words(radius)
    vals = rng.standard_normal(len(words)) + 1j * rng.standard_normal(len(words))
    return GroupRingElement(free, dict(zip(words, vals)))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


# -- handlers: space ------------------------------------------------------------------


def _h_space_girth(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["input"])
    g = girth(space)
    summary = {"girth": g, "points": space.n, "space_hash": space.content_hash()}
    return ({"name": "space_girth", "summary": summary},
            [_fmt(g) if g is not None else "none"])


def _h_space_delta(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["input"])
    kwargs = {} if p["max_points"] is None else {"max_points": p["max_points"]}
    value = hyperbolicity_delta(space, **kwargs)
    summary = {"delta": value, "points": space.n,
               "space_hash": space.content_hash()}
    return ({"name": "space_delta", "summary": summary}, [_fmt(value)])


def _h_space_annuli(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["input"])
    ann = annular_decomposition(space, p["width"])
    rows = [(k, len(part)) for k, part in enumerate(ann.parts)]
    summary = {"width": ann.width, "annuli": len(ann.parts),
               "sizes": [len(part) for part in ann.parts],
               "space_hash": space.content_hash()}
    return ({"name": "space_annuli", "summary": summary,
             "tables": {"annuli": (("k", "size"), rows)}},
            [_fmt(len(ann.parts))])


# -- handlers: cover ------------------------------------------------------------------


def _h_cover_radius(p: dict, cfg: ExperimentConfig):
    cover = build_covering_family(p["source"], [p["target"]], p["ball"])[0]
    r = cover.injectivity_radius
    summary = {"injectivity_radius": r, "source": p["source"],
               "target": p["target"], "ball_radius": cover.source.radius,
               "target_points": cover.target.n}
    return ({"name": "cover_radius", "summary": summary}, [_fmt(r)])


def _h_cover_faithfulness(p: dict, cfg: ExperimentConfig):
    family = build_covering_family(p["source"], p["targets"], p["ball"])
    report = faithfulness_report(family)
    rows = list(enumerate(report.radii))
    summary = {"radii": list(report.radii), "verdict": report.verdict,
               "note": report.note, "targets": list(p["targets"])}
    return ({"name": "cover_faithfulness", "summary": summary,
             "tables": {"radii": (("m", "r_m"), rows)}},
            [report.verdict])


# -- handlers: lift -------------------------------------------------------------------


def _h_lift_profile(p: dict, cfg: ExperimentConfig):
    a = load_element(p["element"])
    family = build_covering_family(p["source"], p["targets"], p["ball"])
    profile = limsup_norm_profile(a, family, tol=p["tol"])
    header = ("m", "r_m", "norm_lift", "norm_base", "ratio")
    rows = profile.rows()
    summary = {
        "description": profile.description,
        "base_norm": profile.base_norm,
        "limsup_estimate": profile.limsup_estimate,
        "window_length": profile.window_length,
        "skipped_terms": list(profile.skipped),
        "witness_ratio": profile.witness_ratio,
        "witness_support": profile.witness_support,
        "max_witness_mismatch": max(profile.witness_matches, default=0.0),
        "note": profile.note,
    }
    return ({"name": "lift_profile", "summary": summary,
             "tables": {"profile": (header, rows)},
             "series": {"profile": (header, rows)}},
            [_fmt(profile.limsup_estimate)])


def _h_lift_mult(p: dict, cfg: ExperimentConfig):
    cover = build_covering_family(p["source"], [p["target"]], p["ball"])[0]
    window = LiftWindow(cover, cover.injectivity_radius)
    free = cover.source.free
    r1 = p["r1"] if p["r1"] is not None else window.R // 2
    r2 = p["r2"] if p["r2"] is not None else window.R // 2
    rng = np.random.default_rng(cfg.seed)
    rows = []
    max_ring = max_op = 0.0
    witness = None
    for i in range(p["pairs"]):
        a = _random_ring_element(free, r1, rng)
        b = _random_ring_element(free, r2, rng)
        pa = pushforward_group_ring(a, cover)
        pb = pushforward_group_ring(b, cover)
        lhs = pushforward_group_ring(a.mul(b), cover)
        rhs = pa.mul(pb)
        keys = set(lhs.coeffs) | set(rhs.coeffs)
        ring_resid = max((abs(lhs.coeffs.get(k, 0j) - rhs.coeffs.get(k, 0j))
                          for k in keys), default=0.0)
        report = local_multiplicativity_check(
            to_band_operator(pa, cover.target), to_band_operator(pb, cover.target),
            window)
        rows.append((i, ring_resid, report.max_discrepancy, report.admissible))
        max_ring = max(max_ring, ring_resid)
        if report.max_discrepancy > max_op:
            max_op = report.max_discrepancy
            if report.witness is not None:
                witness = {"pair": i, "row": report.witness[0],
                           "col": report.witness[1],
                           "lift_of_product": report.witness[2],
                           "product_of_lifts": report.witness[3]}
    admissible = r1 + r2 <= window.R
    summary = {"pairs": p["pairs"], "support_radii": [r1, r2],
               "window_radius": window.R, "admissible": admissible,
               "max_ring_residual": max_ring, "max_operator_residual": max_op,
               "witness": witness}
    return ({"name": "lift_mult", "summary": summary,
             "tables": {"pairs": (("i", "ring_residual", "operator_residual",
                                   "admissible"), rows)}},
            [_fmt(max_op)])


# -- handlers: onl --------------------------------------------------------------------


def _h_onl_floor(p: dict, cfg: ExperimentConfig):
    value = onl_constant_floor(p["degree"])
    summary = {"degree": p["degree"], "floor": str(value),
               "floor_float": float(value)}
    return ({"name": "onl_floor", "summary": summary}, [str(value)])


def _amplify_formula(n: int) -> str:
    if n == 1:
        return "g(k)=f(k)"
    coeff = "" if n == 2 else str(n - 1)
    return f"g(k)={coeff}k+f({n}k)"


def _h_onl_amplify(p: dict, cfg: ExperimentConfig):
    f = ControlFunction.from_pairs(p["knots"]) if p["knots"] \
        else ControlFunction.constant(0.0)
    n, g = amplify_constant(p["c"], f, p["target"], mode=p["mode"])
    formula = _amplify_formula(n)
    summary = {"n": n, "formula": formula, "c": p["c"],
               "c_target": p["target"], "mode": p["mode"],
               "g_knots": [list(k) for k in g.knots], "g_slope": g.slope}
    return ({"name": "onl_amplify", "summary": summary},
            [f"n={n}", formula])


def _h_onl_certificate(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["space"])
    ensemble = standard_ensemble(space, p["r"], p["size"], cfg.seed)
    result = onl_estimate(space, p["r"], p["c"], ensemble, cfg.seed,
                          f_cap=p["f_cap"], tol=p["tol"],
                          ensemble_kind="standard")
    if isinstance(result, ONLCertificate):
        summary = result.to_json_dict()
        summary["kind"] = "certificate"
        summary["verified"] = result.verify(ensemble)
        rows = [(i, ratio, norm) for i, (ratio, norm)
                in enumerate(zip(result.ratios, result.operator_norms))]
        return ({"name": "onl_certificate", "summary": summary,
                 "tables": {"ratios": (("i", "ratio", "norm"), rows)}},
                [f"f({p['r']})={result.f_R}"])
    summary = {"kind": "counterexample", "R": result.R, "c": result.c,
               "f_cap": result.f_cap, "hardest_index": result.hardest_index,
               "best_ratio": result.best_ratio, "note": result.note,
               "ensemble": {"kind": result.ensemble_kind,
                            "size": result.ensemble_size, "seed": result.seed}}
    return ({"name": "onl_certificate", "summary": summary},
            [f"no admissible diameter at c={_fmt(p['c'])}; "
             f"best ratio {_fmt(result.best_ratio)}"])


def _h_onl_lacunary(p: dict, cfg: ExperimentConfig):
    controls = lacunary_control_radius(p["deltas"], p["radii"])
    rows = [(m, d, r, radius, alt) for m, (d, r, radius, alt) in enumerate(
        zip(controls.delta, controls.r, controls.radii, controls.alt_radii))]
    summary = {"verdict": controls.verdict, "note": controls.note,
               "radii": list(controls.radii),
               "alt_radii": list(controls.alt_radii)}
    return ({"name": "onl_lacunary", "summary": summary,
             "tables": {"controls": (("m", "delta", "r", "radius",
                                      "alt_radius"), rows)},
             "series": {"controls": (("m", "radius"),
                                     [(m, radius) for m, _, _, radius, _ in rows])}},
            [controls.verdict])


# -- handlers: quantk -----------------------------------------------------------------


def _h_quantk_check(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["space"])
    op = _load_operator(p["operator"], space)
    params = QuantParams(p["r"], p["eps"])
    checker = {"projection": check_quasi_projection,
               "unitary": check_quasi_unitary}[p["kind"]]
    verdict = checker(op, params)
    summary = verdict.to_json_dict()
    return ({"name": "quantk_check", "summary": summary},
            ["PASS" if verdict.passed else "FAIL"])


def _pou_from_spec(spec: str, space: FiniteSpace) -> PartitionOfUnity:
    if spec == "trivial":
        return PartitionOfUnity.trivial(space)
    head, _, tail = spec.partition(":")
    if head == "balls":
        try:
            radius = int(tail)
        except ValueError:
            raise ConfigError(f"bad partition spec {spec!r}: expected balls:<int>") from None
        if radius < 0:
            raise ConfigError("ball radius must be >= 0")
        cover = Cover([np.where(space.dist[x] <= radius)[0].tolist()
                       for x in range(space.n)])
        return PartitionOfUnity.uniform(space, cover)
    raise ConfigError(f"unknown partition spec {spec!r} (use trivial or balls:<r>)")


def _h_quantk_index(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["space"])
    op = _load_operator(p["operator"], space)
    pou = _pou_from_spec(p["pou"], space)
    r = p["r"] if p["r"] is not None else op.propagation
    report = index_class_check(op, pou, QuantParams(r, p["eps"]))
    summary = {
        "r_prime": report.r_prime, "eps_prime": report.eps_prime,
        "self_adjoint_residual": report.self_adjoint_residual,
        "is_quasi_projection": report.is_quasi_projection,
        "augmentation_constant": report.augmentation_constant,
        "scalar_matrix": [list(row) for row in report.scalar_matrix]
        if report.scalar_matrix is not None else None,
        "scalar_is_diag_one_zero": report.scalar_is_diag_one_zero,
        "difference_signature": list(report.difference_signature),
        "note": report.note,
    }
    return ({"name": "quantk_index", "summary": summary},
            [f"diag(1,0)={report.scalar_is_diag_one_zero}"])


def _h_quantk_path(p: dict, cfg: ExperimentConfig):
    cover = build_covering_family(p["source"], [p["target"]], p["ball"])[0]
    window = LiftWindow(cover, p["window"] if p["window"] is not None
                        else cover.injectivity_radius)
    op = _load_operator(p["operator"], cover.target)
    times = p["times"]
    path = LocalisationPath(times, [op] * len(times))
    lifted, report = path_lift_report(path, window, bound_constant=p["c"],
                                      tol=p["tol"])
    summary = {
        "times": list(times),
        "propagation_schedule": list(path.propagation_schedule),
        "sup_norm_source": report.sup_norm_source,
        "sup_norm_lifted": report.sup_norm_lifted,
        "bound_constant": report.bound_constant,
        "bound_holds": report.bound_holds,
        "commuting_residual": report.commuting_residual,
        "window_radius": window.R,
    }
    return ({"name": "quantk_path", "summary": summary},
            [_fmt(report.commuting_residual)])


def _h_quantk_records(p: dict, cfg: ExperimentConfig):
    a, b, ef = p["r_coeff"], p["d_coeff"], p["eps_factor"]

    def qs_oracle(d: float, R: int, eps: float) -> tuple[float, float]:
        return a * R + b * d, eps * ef

    qi_oracle = None
    if p["qi"]:
        def qi_oracle(d: float, R: int, eps: float) -> tuple[float, float]:
            return a * R + b * d, d + R

    table = qs_qi_records(qs_oracle, p["grid"], p["eps"], qi_oracle=qi_oracle)
    rows = table.rows()
    summary = {"verdict": table.verdict, "note": table.note,
               "terms": len(rows),
               "oracle": {"r_coeff": a, "d_coeff": b, "eps_factor": ef,
                          "with_injectivity": bool(p["qi"])}}
    if table.injectivity is not None:
        summary["injectivity_L"] = [rec.L for rec in table.injectivity]
    return ({"name": "quantk_records", "summary": summary,
             "tables": {"records": (("m", "d_m", "r_m", "k_m", "R_m"), rows)}},
            [table.verdict])


# -- handlers: rd ---------------------------------------------------------------------


def _h_rd_norm(p: dict, cfg: ExperimentConfig):
    a = load_element(p["element"])
    value = sobolev_norm(a, p["s"])
    summary = {"s": p["s"], "sobolev_norm": value, "l2_norm": a.l2_norm(),
               "support_radius": a.support_radius,
               "support_size": len(a.coeffs)}
    return ({"name": "rd_norm", "summary": summary}, [_fmt(value)])


def _h_rd_estimate(p: dict, cfg: ExperimentConfig):
    space = parse_space_spec(p["space"])
    if not isinstance(space, CayleySpace):
        raise ConfigError("rd estimate needs a cayley:<n> space "
                          "(samples live on its marking)")
    marking = space.marking
    rng = np.random.default_rng(cfg.seed)
    lengths = marking.lengths
    support = [g for g in marking.group.elements if lengths[marking.group.index[g]] <= p["r"]]
    samples = []
    for _ in range(p["size"]):
        vals = rng.standard_normal(len(support)) + 1j * rng.standard_normal(len(support))
        samples.append(GroupRingElement(marking, dict(zip(support, vals))))
    estimate = rd_constant_estimate(samples, space, p["s"], seed=cfg.seed,
                                    tol=p["tol"])
    summary = {"s": estimate.s, "constant": estimate.constant,
               "samples": p["size"], "support_radius": p["r"],
               "skipped": list(estimate.skipped), "note": estimate.note}
    return ({"name": "rd_estimate", "summary": summary,
             "tables": {"rd_samples": (("sample", "op_norm", "sobolev_norm",
                                        "ratio"), estimate.rows())}},
            [_fmt(estimate.constant)])


def _h_rd_isometry(p: dict, cfg: ExperimentConfig):
    a = load_element(p["element"])
    cover = build_covering_family(p["source"], [p["target"]], p["ball"])[0]
    window = LiftWindow(cover, cover.injectivity_radius)
    check = lift_isometry_check(a, window, p["s"])
    summary = {"equal": check.equal, "residual": check.residual,
               "source_value": check.source_value,
               "lifted_value": check.lifted_value, "s": check.s}
    return ({"name": "rd_isometry", "summary": summary},
            ["PASS" if check.equal else "FAIL"])


# -- handlers: sc ---------------------------------------------------------------------


def _load_presentation(path: str) -> Presentation:
    try:
        return Presentation.from_text(_load_text(path))
    except ValueError as exc:
        raise InputError(f"malformed presentation file {path}: {exc}") from None


def _h_sc_pieces(p: dict, cfg: ExperimentConfig):
    pres = _load_presentation(p["input"])
    if not pres.relators:
        raise ValueError("presentation has no relators")
    table = compute_pieces(pres.relators)
    rows = [(i, rel.letters, len(rel), table.max_piece[i])
            for i, rel in enumerate(pres.relators)]
    summary = {"alphabet": pres.alphabet, "relators": len(pres.relators),
               "length_profile": list(pres.length_profile()),
               "max_piece": list(table.max_piece),
               "overall_max": table.overall_max()}
    return ({"name": "sc_pieces", "summary": summary,
             "tables": {"pieces": (("i", "relator", "length", "max_piece"),
                                   rows)}},
            [_fmt(table.overall_max())])


def _h_sc_condition(p: dict, cfg: ExperimentConfig):
    pres = _load_presentation(p["input"])
    if p["metric"] is not None:
        verdict = check_condition(pres.relators, metric=p["metric"])
        label = f"C'({_fmt(p['metric'])})"
    else:
        verdict = check_condition(pres.relators, count=p["count"])
        label = f"C({p['count']})"
    summary = {"kind": verdict.kind, "parameter": verdict.parameter,
               "condition": label, "passed": verdict.passed,
               "witnesses": [list(w) for w in verdict.witnesses],
               "min_decompositions": list(verdict.min_decompositions)
               if verdict.min_decompositions is not None else None}
    return ({"name": "sc_condition", "summary": summary},
            ["PASS" if verdict.passed else "FAIL"])


def _xor_metric_count(params: dict) -> None:
    if (params["metric"] is None) == (params["count"] is None):
        raise ConfigError("give exactly one of --metric or --count")


def _stub_oracle(t_factor: float, eps_factor: float):
    def oracle(r: float, eps: float) -> tuple[float, float]:
        return t_factor * r, eps_factor * eps
    return oracle


def _h_sc_schedule(p: dict, cfg: ExperimentConfig):
    oracle = _stub_oracle(p["t_factor"], p["eps_factor"])
    states = schedule_general(p["lengths"], oracle, r0=p["r0"], eps0=p["eps0"],
                              gap=p["gap"], max_stages=p["max_stages"],
                              min_stages=p["min_stages"])
    verify_schedule(states, p["lengths"])
    stages = [st.to_json_dict() for st in states]
    rows = [(st.stage, st.scale, st.epsilon, st.oracle_t, len(st.new_lengths))
            for st in states]
    summary = {"stages": len(states), "final_scale": states[-1].scale,
               "final_epsilon": states[-1].epsilon,
               "relators_scheduled": len(states[-1].relator_lengths),
               "verified": True, "stages_file": "stages.json"}
    return ({"name": "sc_schedule", "summary": summary,
             "tables": {"schedule": (("stage", "scale", "epsilon", "oracle_t",
                                      "new_relators"), rows)},
             "extra_json": {"stages": stages}},
            [_fmt(len(states))])


def _h_sc_graphs(p: dict, cfg: ExperimentConfig):
    graphs = []
    for path in p["inputs"]:
        try:
            graphs.append(LabelledGraph.from_json(_load_text(path)))
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"malformed graph file {path}: {exc}") from None
    oracle = _stub_oracle(p["t_factor"], p["eps_factor"])
    schedule = schedule_from_graphs(graphs, oracle, eps0=p["eps0"],
                                    gap=p["gap"], cycle_cap=p["cycle_cap"],
                                    max_stages=p["max_stages"])
    stages = [st.to_json_dict() for st in schedule.states]
    girths = [graphs[i].girth() for i in schedule.selected]
    summary = {"stages": len(schedule.states),
               "selected": list(schedule.selected),
               "selected_girths": girths,
               "shortfall": schedule.shortfall,
               "stages_file": "stages.json"}
    return ({"name": "sc_graphs", "summary": summary,
             "tables": {"selection": (("stage", "graph_index", "girth"),
                                      [(m, i, g) for m, (i, g)
                                       in enumerate(zip(schedule.selected, girths))])},
             "extra_json": {"stages": stages}},
            [",".join(str(i) for i in schedule.selected)])


# -- registry -------------------------------------------------------------------------


_TOL = Param("tol", "float", default=1e-9, help="norm tolerance", check=_check_pos)
_SOURCE = Param("source", "str", default="z", help="source group: z or free:<rank>")
_BALL = Param("ball", "int", help="source ball radius (default from targets)",
              check=_check_pos)

_REGISTRY: dict[str, dict[str, ActionSpec]] = {
    "space": {
        "girth": ActionSpec(
            params=(Param("input", "str", required=True,
                          help="space file or cycle:N/path:N/cayley:N"),),
            handler=_h_space_girth, help="shortest cycle length"),
        "delta": ActionSpec(
            params=(Param("input", "str", required=True),
                    Param("max_points", "int", check=_check_pos,
                          help="four-point sample cap")),
            handler=_h_space_delta, help="four-point hyperbolicity constant"),
        "annuli": ActionSpec(
            params=(Param("input", "str", required=True),
                    Param("width", "int", required=True, check=_check_pos)),
            handler=_h_space_annuli, help="annular decomposition sizes"),
    },
    "cover": {
        "radius": ActionSpec(
            params=(_SOURCE,
                    Param("target", "str", required=True,
                          help="cyclic:N or quotient spec file"),
                    _BALL),
            handler=_h_cover_radius, help="injectivity radius of one covering"),
        "faithfulness": ActionSpec(
            params=(_SOURCE,
                    Param("targets", "strs", required=True,
                          help="comma-separated targets"),
                    _BALL),
            handler=_h_cover_faithfulness,
            help="injectivity radii along a family"),
    },
    "lift": {
        "profile": ActionSpec(
            params=(Param("element", "str", required=True,
                          help="group-ring element JSON file"),
                    _SOURCE,
                    Param("targets", "strs", required=True),
                    _BALL, _TOL),
            handler=_h_lift_profile,
            help="transported norms along a covering family"),
        "mult": ActionSpec(
            params=(_SOURCE,
                    Param("target", "str", required=True),
                    _BALL,
                    Param("r1", "int", check=_check_nonneg,
                          help="support radius of the left factor"),
                    Param("r2", "int", check=_check_nonneg,
                          help="support radius of the right factor"),
                    Param("pairs", "int", default=20, check=_check_pos)),
            handler=_h_lift_mult, needs_seed=True,
            help="multiplicativity of transport on random pairs"),
    },
    "onl": {
        "floor": ActionSpec(
            params=(Param("degree", "int", required=True, check=_check_pos),),
            handler=_h_onl_floor, help="localisation constant floor 1/(2|S|)"),
        "amplify": ActionSpec(
            params=(Param("c", "float", required=True, check=_check_unit),
                    Param("target", "float", required=True, check=_check_unit),
                    Param("mode", "str", default="default",
                          help="default or verbatim"),
                    Param("knots", "pairs",
                          help="control function knots x:y,x:y")),
            handler=_h_onl_amplify, help="constant amplification arithmetic"),
        "certificate": ActionSpec(
            params=(Param("space", "str", required=True),
                    Param("r", "int", required=True, check=_check_nonneg),
                    Param("c", "float", required=True, check=_check_unit),
                    Param("size", "int", default=6, check=_check_pos),
                    Param("f_cap", "int", check=_check_nonneg),
                    _TOL),
            handler=_h_onl_certificate, needs_seed=True,
            help="localisation certificate over a seeded ensemble"),
        "lacunary": ActionSpec(
            params=(Param("deltas", "floats", required=True),
                    Param("radii", "floats", required=True)),
            handler=_h_onl_lacunary, help="per-term control radii"),
    },
    "quantk": {
        "check": ActionSpec(
            params=(Param("kind", "str", required=True,
                          help="projection or unitary",
                          check=lambda v: None if v in ("projection", "unitary")
                          else "must be projection or unitary"),
                    Param("operator", "str", required=True),
                    Param("space", "str", required=True),
                    Param("r", "int", required=True, check=_check_nonneg),
                    Param("eps", "float", required=True, check=_check_eps)),
            handler=_h_quantk_check, help="quasi-projection/unitary residuals"),
        "index": ActionSpec(
            params=(Param("operator", "str", required=True),
                    Param("space", "str", required=True),
                    Param("eps", "float", required=True, check=_check_eps),
                    Param("r", "int", check=_check_nonneg),
                    Param("pou", "str", default="trivial",
                          help="trivial or balls:<r>")),
            handler=_h_quantk_index, help="index form of the smoothed cycle"),
        "path": ActionSpec(
            params=(Param("operator", "str", required=True,
                          help="operator on the quotient target"),
                    _SOURCE,
                    Param("target", "str", required=True),
                    _BALL,
                    Param("times", "floats", default=(0.0, 1.0)),
                    Param("window", "int", check=_check_nonneg),
                    Param("c", "float", default=1.0, check=_check_pos),
                    _TOL),
            handler=_h_quantk_path,
            help="lift a constant path and check evaluation commutes"),
        "records": ActionSpec(
            params=(Param("grid", "pairs", required=True,
                          help="d:r pairs, comma-separated"),
                    Param("eps", "float", required=True, check=_check_eps),
                    Param("r_coeff", "float", default=2.0, check=_check_pos),
                    Param("d_coeff", "float", default=0.0, check=_check_nonneg),
                    Param("eps_factor", "float", default=0.5, check=_check_unit),
                    Param("qi", "bool", default=False,
                          help="also tabulate the injectivity side")),
            handler=_h_quantk_records, help="control-radius table"),
    },
    "rd": {
        "norm": ActionSpec(
            params=(Param("element", "str", required=True),
                    Param("s", "float", required=True, check=_check_nonneg)),
            handler=_h_rd_norm, help="weighted coefficient norm"),
        "estimate": ActionSpec(
            params=(Param("space", "str", required=True, help="cayley:<n>"),
                    Param("s", "float", required=True, check=_check_nonneg),
                    Param("r", "int", default=1, check=_check_nonneg,
                          help="sample support radius"),
                    Param("size", "int", default=8, check=_check_pos),
                    _TOL),
            handler=_h_rd_estimate, needs_seed=True,
            help="empirical rapid-decay constant"),
        "isometry": ActionSpec(
            params=(Param("element", "str", required=True,
                          help="element on the quotient marking"),
                    _SOURCE,
                    Param("target", "str", required=True),
                    _BALL,
                    Param("s", "float", required=True, check=_check_nonneg)),
            handler=_h_rd_isometry, help="lift isometry inside the window"),
    },
    "sc": {
        "pieces": ActionSpec(
            params=(Param("input", "str", required=True,
                          help="presentation text file"),),
            handler=_h_sc_pieces, help="piece census of a presentation"),
        "condition": ActionSpec(
            params=(Param("input", "str", required=True),
                    Param("metric", "float", check=_check_unit,
                          help="metric condition parameter lambda"),
                    Param("count", "int",
                          check=lambda v: None if v >= 2 else "must be >= 2",
                          help="count condition parameter p")),
            handler=_h_sc_condition, post_check=_xor_metric_count,
            help="metric or count condition verdict"),
        "schedule": ActionSpec(
            params=(Param("lengths", "floats", required=True,
                          help="nondecreasing relator length stream"),
                    Param("r0", "float", required=True, check=_check_pos),
                    Param("eps0", "float", required=True, check=_check_eps),
                    Param("gap", "float", default=4.0, check=_check_gap),
                    Param("t_factor", "float", default=2.0, check=_check_pos),
                    Param("eps_factor", "float", default=0.5, check=_check_unit),
                    Param("max_stages", "int", default=32, check=_check_pos),
                    Param("min_stages", "int", default=0, check=_check_nonneg)),
            handler=_h_sc_schedule, help="relator admission schedule"),
        "graphs": ActionSpec(
            params=(Param("inputs", "strs", required=True,
                          help="comma-separated graph JSON files"),
                    Param("eps0", "float", required=True, check=_check_eps),
                    Param("gap", "float", default=4.0, check=_check_gap),
                    Param("t_factor", "float", default=2.0, check=_check_pos),
                    Param("eps_factor", "float", default=0.5, check=_check_unit),
                    Param("cycle_cap", "int", check=_check_pos),
                    Param("max_stages", "int", default=32, check=_check_pos)),
            handler=_h_sc_graphs, help="girth-driven graph schedule"),
    },
}


# -- parsing and dispatch ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="coarsekit",
        description="Batch experiments for coarse-geometry numerics.")
    top.add_argument("--config", help="TOML file with parameter defaults")
    top.add_argument("--output-dir", dest="output_dir",
                     help=f"report directory (default ${ENV_OUTPUT_DIR} "
                          f"or {DEFAULT_OUTPUT_DIR})")
    top.add_argument("--seed", type=int, help="RNG seed for ensemble commands")
    commands = top.add_subparsers(dest="command", required=True)
    for command, actions in _REGISTRY.items():
        cp = commands.add_parser(command)
        acts = cp.add_subparsers(dest="action", required=True)
        for action, spec in actions.items():
            ap = acts.add_parser(action, help=spec.help)
            for prm in spec.params:
                flag = "--" + prm.name.replace("_", "-")
                if prm.kind == "bool":
                    ap.add_argument(flag, dest=prm.name, action="store_const",
                                    const=True, default=None, help=prm.help)
                else:
                    ap.add_argument(flag, dest=prm.name, default=None,
                                    help=prm.help)
    return top


def run(config: ExperimentConfig) -> int:
    """Execute one configured experiment and write its reports."""
    spec = _REGISTRY[config.command][config.action]
    try:
        results, lines = spec.handler(dict(config.params), config)
        emit_report(results, config.output_dir, meta=config.meta())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except NormConvergenceError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 4
    for line in lines:
        print(line)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        file_cfg = _load_config_file(ns.config) if ns.config else {}
        config = build_config(ns, file_cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    return run(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
