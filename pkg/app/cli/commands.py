import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from app.core.config import settings
from app.core.exceptions import CertificationError, InvalidInputError
from app.models.enums import ExpansionCriterion
from app.models.group import FiniteGroupBackend
from app.models.matrix import IntMatrix
from app.models.word import WordSet
from app.schemas.common import parse_rational
from app.schemas.constructions import AmplifyParams, ComposeParams, SpielmanParams, SyndromeParams
from app.schemas.groups import PMSGParams
from app.schemas.manifest import RunManifest
from app.services.abelian_service import abelian_service
from app.services.certify_service import certify_service
from app.services.construction_service import construction_service
from app.services.expander_service import expander_service
from app.services.group_service import group_service
from app.services.manifest_service import canonical_json, manifest_service
from app.services.word_service import word_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

# (payload, exit code)
Outcome = Tuple[Dict[str, Any], int]


def rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def read_json(path: str) -> Any:
    """Parse a JSON file; syntax errors become InvalidInputError with line and column."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInputError(f"cannot read {path}: {str(e)}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")


def load_wordset(path: str) -> WordSet:
    return word_service.load_wordset(read_json(path))


def load_group(path: str) -> FiniteGroupBackend:
    return group_service.build_group(read_json(path))


def load_code(path: str, group: FiniteGroupBackend):
    """A word set document, or a bare JSON list of raw group elements."""
    data = read_json(path)
    if isinstance(data, list):
        return [group.coerce(x) for x in data]
    return word_service.load_wordset(data)


def _dump(model) -> Dict[str, Any]:
    return model.model_dump(mode="json")


def _params(params) -> Dict[str, Any]:
    """Parameters as embedded in outputs; the thread count never changes results."""
    return params.model_dump(mode="json", exclude={"threads"})


# construct

def construct_hadamard(args) -> Outcome:
    code = construction_service.hadamard_code(args.k)
    matching = certify_service.hadamard_matching_certificate(code, seed=args.seed)
    payload = word_service.dump_wordset(code, params={"k": args.k}, certificate=_dump(matching))
    return payload, EXIT_OK


def construct_syndrome(args) -> Outcome:
    params = SyndromeParams(
        k=args.k,
        reps_per_level=args.c or settings.SYNDROME_REPS,
        target_factor=args.target_factor or settings.SYNDROME_TARGET_FACTOR,
        seed=args.seed,
        max_resamples=args.max_resamples or settings.MAX_RESAMPLES,
        exhaustive_max_k=args.exhaustive_max_k,
        threads=args.threads,
    )
    result = construction_service.random_syndrome_code(params)
    payload = word_service.dump_wordset(
        result.code,
        params=_params(params),
        certificate=_dump(result.certificate) | {"threshold": str(result.threshold), "attempts": result.attempts},
    )
    return payload, EXIT_OK


def construct_amplify(args) -> Outcome:
    A = load_wordset(args.input)
    params = AmplifyParams(
        delta_in=args.delta,
        groups=args.c or settings.AMPLIFY_GROUPS,
        subset_size=args.subset_size,
        seed=args.seed,
        max_resamples=args.max_resamples or settings.MAX_RESAMPLES,
        exhaustive_max_k=args.exhaustive_max_k,
        threads=args.threads,
    )
    result = construction_service.amplify(A, params)
    certificate = _dump(result.certificate) | {"coverage": _dump(result.coverage), "attempts": result.attempts}
    payload = word_service.dump_wordset(result.code, params=_params(params), certificate=certificate)
    return payload, EXIT_OK


def construct_compose(args) -> Outcome:
    params = ComposeParams(
        reps_per_level=args.c or settings.SYNDROME_REPS,
        groups=args.groups or settings.AMPLIFY_GROUPS,
        subset_size=args.subset_size,
        seed=args.seed,
        max_resamples=args.max_resamples or settings.MAX_RESAMPLES,
        exhaustive_max_k=args.exhaustive_max_k,
        threads=args.threads,
    )
    result = construction_service.iterative_compose(args.k, args.t, params)
    report = _dump(result)
    report.pop("code")
    payload = word_service.dump_wordset(
        result.code, params=_params(params) | {"k": args.k, "t": args.t}, certificate=report
    )
    code = EXIT_OK if result.structural_delta >= Fraction(result.target) else EXIT_FAILED
    return payload, code


def construct_spielman(args) -> Outcome:
    params = SpielmanParams(
        k0=args.k0,
        steps=args.steps,
        d=args.d,
        alpha=args.alpha,
        epsilon=args.epsilon,
        s_max=args.s_max,
        criterion=args.criterion,
        seed=args.seed,
        max_resamples=args.max_resamples or settings.GRAPH_MAX_RESAMPLES,
        threads=args.threads,
    )
    result = construction_service.spielman_chain(params)
    report = _dump(result)
    report.pop("code")
    payload = word_service.dump_wordset(result.code, params=_params(params), certificate=report)
    return payload, EXIT_OK


# certify / report

def _backends(paths: Optional[List[str]]) -> List[Tuple[FiniteGroupBackend, None]]:
    return [(load_group(path), None) for path in paths or []]


def certify(args) -> Outcome:
    A = load_wordset(args.input)
    cert = certify_service.certified_delta(A, exhaustive_max_k=args.exhaustive_max_k, trials=args.trials, seed=args.seed, threads=args.threads)
    payload: Dict[str, Any] = {"syndrome": _dump(cert)}
    best = cert.delta_lower if cert.certifying else Fraction(0)
    closure_ok = bool(A.closure)
    if closure_ok:
        try:
            certify_service.verify_closure(A)
        except CertificationError as e:
            logger.warning(f"Closure blocks rejected, using the flat certificate: {str(e)}")
            payload["closure_rejected"] = str(e)
            closure_ok = False
    if closure_ok:
        blocks = certify_service.closure_certificate(A, exhaustive_max_k=args.exhaustive_max_k, seed=args.seed, threads=args.threads)
        payload["blocks"] = _dump(blocks)
        if blocks.certifying:
            best = max(best, blocks.delta_lower)
        if len(A.closure) == 1 and A.closure[0].offset == 0 and A.closure[0].size == len(A):
            matching = certify_service.hadamard_matching_certificate(A, seed=args.seed)
            payload["matching"] = _dump(matching)
            if matching.base_is_basis:
                best = max(best, matching.value)
    payload["best_certified"] = str(best)
    if args.target is not None and best < args.target:
        logger.error(f"Certified {best} is below the target {args.target}")
        return payload, EXIT_FAILED
    return payload, EXIT_OK


def report(args) -> Outcome:
    A = load_wordset(args.input)
    result = certify_service.report(A, _backends(args.group), seed=args.seed)
    return _dump(result), EXIT_OK


# groups

def groups_delta(args) -> Outcome:
    group = load_group(args.group)
    code = load_code(args.input, group)
    delta = group_service.exact_delta(code, group, threads=args.threads)
    payload = {"group": group.describe(), "delta": str(delta)}
    if args.all_subgroups:
        payload["delta_all_subgroups"] = str(group_service.exact_delta_all_subgroups(code, group))
    return payload, EXIT_OK


def groups_lattice(args) -> Outcome:
    group = load_group(args.group)
    return _dump(group_service.subgroup_lattice(group)), EXIT_OK


def groups_pmsg(args) -> Outcome:
    params = PMSGParams(exponent=args.exponent, delta=args.delta, k=args.k)
    payload = {"sample_size": _dump(group_service.pmsg_sample_size(params))}
    if args.group:
        result = group_service.solvable_random_code(load_group(args.group), params, seed=args.seed)
        payload["code"] = _dump(result)
    return payload, EXIT_OK


def groups_pushforward(args) -> Outcome:
    source = load_group(args.group)
    target = load_group(args.target)
    images = read_json(args.images)
    code = load_code(args.input, source)
    result = group_service.quotient_pushforward_check(code, source, target, images)
    return _dump(result), EXIT_OK if result.passed else EXIT_FAILED


# expanders

def expander_sample(args) -> Outcome:
    if args.verified:
        graph, cert = expander_service.sample_verified(
            args.n, args.m, args.d, args.alpha, args.epsilon, args.s_max, seed=args.seed, criterion=args.criterion
        )
        return expander_service.dump_graph(graph) | {"certificate": _dump(cert)}, EXIT_OK
    graph = expander_service.sample_left_regular(args.n, args.m, args.d, seed=args.seed)
    return expander_service.dump_graph(graph), EXIT_OK


def expander_verify(args) -> Outcome:
    graph = expander_service.load_graph(read_json(args.graph))
    cert = expander_service.verify_unique_neighbors(
        graph, args.alpha, args.epsilon, args.s_max, criterion=args.criterion, trials=args.trials, seed=args.seed, threads=args.threads
    )
    return _dump(cert), EXIT_OK if cert.passed else EXIT_FAILED


# abelian codes

def abelian_build(args) -> Outcome:
    graph = expander_service.load_graph(read_json(args.graph))
    cert = expander_service.verify_unique_neighbors(graph, args.alpha, args.epsilon, args.s_max, criterion=args.criterion, seed=args.seed)
    if not cert.passed:
        logger.error("Graph failed neighbour verification; no code built")
        return {"graph_certificate": _dump(cert)}, EXIT_FAILED
    matrix, result = abelian_service.build_abelian_code(graph, cert, primes=args.primes, seed=args.seed)
    payload = abelian_service.dump_matrix(matrix) | {"report": _dump(result), "graph_certificate": _dump(cert)}
    return payload, EXIT_OK if result.passed else EXIT_FAILED


def abelian_verify(args) -> Outcome:
    matrix = abelian_service.load_matrix(read_json(args.matrix))
    primes = args.primes or settings.DEFAULT_PRIMES
    independence = {str(p): abelian_service.mod_p_independence(matrix, p) for p in primes}
    payload = {"rows": matrix.rows, "cols": matrix.cols, "entry_bitsize": matrix.max_bitsize, "independent": independence}
    if args.parity:
        parity = abelian_service.load_matrix(read_json(args.parity))
        payload["in_kernel"] = parity.matmul(matrix).is_zero()
    ok = all(independence.values()) and payload.get("in_kernel", True)
    return payload, EXIT_OK if ok else EXIT_FAILED


def abelian_distance(args) -> Outcome:
    matrix = abelian_service.load_matrix(read_json(args.matrix))
    result = abelian_service.distance_exact(matrix, args.p, trials=args.trials, seed=args.seed, threads=args.threads)
    return _dump(result), EXIT_OK


# bridge

def bridge(args) -> Outcome:
    """Abelianize a word set mod p: generator matrix, distance and the delta it must equal."""
    A = load_wordset(args.input)
    rows = [word_service.abelianize(w, A.rank, args.p) for w in A.words]
    generator = IntMatrix.from_rows(rows, cols=A.rank)
    distance = abelian_service.distance_exact(generator, args.p, seed=args.seed, threads=args.threads)
    delta = group_service.exact_delta_vector_space(A, args.p)
    agrees = Fraction(distance.distance, len(A)) == delta
    if not agrees and distance.method.value == "exact":
        logger.error(f"Bridge mismatch: distance {distance.distance}/{len(A)} against delta {delta}")
    payload = abelian_service.dump_matrix(generator) | {
        "distance": _dump(distance),
        "delta": str(delta),
        "agrees": agrees,
        "gv": _dump(abelian_service.gv_point(A.rank, len(A), delta)),
    }
    return payload, EXIT_OK if agrees else EXIT_FAILED


# parser

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)
    parser.add_argument("--out", default=None, help="output file; stdout when omitted")


def _criterion(parser: argparse.ArgumentParser, default: ExpansionCriterion = ExpansionCriterion.LOSSLESS) -> None:
    parser.add_argument("--criterion", type=ExpansionCriterion, choices=list(ExpansionCriterion), default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.PROJECT_NAME, description="Test subsets of free groups and their certificates")
    commands = parser.add_subparsers(dest="command", required=True)

    construct = commands.add_parser("construct", help="build a word set")
    kinds = construct.add_subparsers(dest="kind", required=True)

    p = kinds.add_parser("hadamard")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(handler=construct_hadamard)

    p = kinds.add_parser("syndrome")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c", type=int, default=None)
    p.add_argument("--target-factor", type=int, default=None)
    p.add_argument("--max-resamples", type=int, default=None)
    p.add_argument("--exhaustive-max-k", type=int, default=None)
    p.set_defaults(handler=construct_syndrome)

    p = kinds.add_parser("amplify")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--delta", type=rational, required=True)
    p.add_argument("--c", type=int, default=None)
    p.add_argument("--subset-size", type=int, default=None)
    p.add_argument("--max-resamples", type=int, default=None)
    p.add_argument("--exhaustive-max-k", type=int, default=None)
    p.set_defaults(handler=construct_amplify)

    p = kinds.add_parser("compose")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--c", type=int, default=None)
    p.add_argument("--groups", type=int, default=None)
    p.add_argument("--subset-size", type=int, default=None)
    p.add_argument("--max-resamples", type=int, default=None)
    p.add_argument("--exhaustive-max-k", type=int, default=None)
    p.set_defaults(handler=construct_compose)

    p = kinds.add_parser("spielman")
    p.add_argument("--k", "--k0", dest="k0", type=int, default=4, help="base rank")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--alpha", type=rational, default=Fraction(1, 32))
    p.add_argument("--epsilon", type=rational, default=Fraction(3, 8))
    p.add_argument("--s-max", type=int, default=4)
    p.add_argument("--max-resamples", type=int, default=None)
    _criterion(p, ExpansionCriterion.UNIQUE)
    p.set_defaults(handler=construct_spielman)

    for sub in kinds.choices.values():
        _common(sub)

    p = commands.add_parser("certify", help="one-occurrence and closure certificates")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--exhaustive-max-k", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--target", type=rational, default=None)
    _common(p)
    p.set_defaults(handler=certify)

    p = commands.add_parser("report", help="certificates, quotient deltas, lengths and the GV point")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--group", action="append", help="group spec JSON, repeatable")
    _common(p)
    p.set_defaults(handler=report)

    groups = commands.add_parser("groups", help="finite group backends")
    verbs = groups.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("delta")
    p.add_argument("--in", dest="input", required=True, help="word set JSON or a JSON list of elements")
    p.add_argument("--group", required=True)
    p.add_argument("--all-subgroups", action="store_true")
    p.set_defaults(handler=groups_delta)

    p = verbs.add_parser("lattice")
    p.add_argument("--group", required=True)
    p.set_defaults(handler=groups_lattice)

    p = verbs.add_parser("pmsg")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=rational, required=True)
    p.add_argument("--exponent", type=rational, default=parse_rational(settings.PMSG_EXPONENT))
    p.add_argument("--group", default=None, help="solvable group to sample from")
    p.set_defaults(handler=groups_pmsg)

    p = verbs.add_parser("pushforward")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--images", required=True, help="JSON list of generator images in the target")
    p.set_defaults(handler=groups_pushforward)

    for sub in verbs.choices.values():
        _common(sub)

    expander = commands.add_parser("expander", help="bipartite graphs")
    verbs = expander.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("sample")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--verified", action="store_true")
    p.add_argument("--alpha", type=rational, default=Fraction(1, 4))
    p.add_argument("--epsilon", type=rational, default=Fraction(1, 4))
    p.add_argument("--s-max", type=int, default=4)
    _criterion(p)
    p.set_defaults(handler=expander_sample)

    p = verbs.add_parser("verify")
    p.add_argument("--graph", required=True)
    p.add_argument("--alpha", type=rational, required=True)
    p.add_argument("--epsilon", type=rational, required=True)
    p.add_argument("--s-max", type=int, required=True)
    p.add_argument("--trials", type=int, default=None)
    _criterion(p)
    p.set_defaults(handler=expander_verify)

    for sub in verbs.choices.values():
        _common(sub)

    abelian = commands.add_parser("abelian", help="integer kernel codes")
    verbs = abelian.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("build")
    p.add_argument("--graph", required=True)
    p.add_argument("--alpha", type=rational, required=True)
    p.add_argument("--epsilon", type=rational, default=Fraction(1, 4))
    p.add_argument("--s-max", type=int, default=6)
    p.add_argument("--primes", type=int, nargs="+", default=None)
    _criterion(p)
    p.set_defaults(handler=abelian_build)

    p = verbs.add_parser("verify")
    p.add_argument("--matrix", required=True)
    p.add_argument("--parity", default=None, help="parity matrix the basis must annihilate")
    p.add_argument("--primes", type=int, nargs="+", default=None)
    p.set_defaults(handler=abelian_verify)

    p = verbs.add_parser("distance")
    p.add_argument("--matrix", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(handler=abelian_distance)

    for sub in verbs.choices.values():
        _common(sub)

    p = commands.add_parser("bridge", help="abelianized code of a word set mod p")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--p", type=int, default=2)
    _common(p)
    p.set_defaults(handler=bridge)

    return parser


def input_paths(args) -> List[str]:
    """Every file argument, so the manifest can pin their digests."""
    paths = []
    for name in ("input", "graph", "matrix", "parity", "images", "target", "group"):
        value = getattr(args, name, None)
        if isinstance(value, str):
            paths.append(value)
        elif isinstance(value, list):
            paths.extend(value)
    for path in paths:
        if not Path(path).is_file():
            raise InvalidInputError(f"no such input file: {path}")
    return paths


def params_of(args) -> Dict[str, Any]:
    """Arguments as plain JSON values; fractions become "p/q"."""
    skip = {"handler", "out", "log_level", "threads"}
    return json.loads(canonical_json({key: value for key, value in vars(args).items() if key not in skip}))


def command_name(args) -> str:
    return " ".join(str(part) for part in (args.command, getattr(args, "kind", None), getattr(args, "verb", None)) if part)


def emit(args, payload: Dict[str, Any], manifest: RunManifest) -> None:
    if args.out:
        manifest_service.write_output(args.out, payload, manifest)
        manifest_service.write_manifest(manifest, args.out)
    else:
        sys.stdout.write(manifest_service.render(payload, manifest))


def run(args, argv: List[str]) -> int:
    handler: Callable[[Any], Outcome] = args.handler
    manifest = manifest_service.start(command_name(args), argv, args.seed, params_of(args), input_paths(args))
    payload, code = handler(args)
    emit(args, payload, manifest)
    return code
