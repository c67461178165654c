"""Command-line front end.

Subcommands: build, epr, gns, screening, lp, check, reproduce.  Every
command emits a JSON run report (stdout with --json, file with --out) whose
bytes are identical across runs given the same inputs and seed; wall-clock
timings go to stderr only, so they never perturb the report.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 input or
usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import epr, gns, io, lp, quantum, screening
from .errors import InvalidMeasure, QmtError
from .measure import DecoherenceFunctional
from .positivity import check_strong_positivity, check_weak_positivity

TSIRELSON = epr.TSIRELSON_BOUND


class _Report:
    def __init__(self, argv, seed=None):
        self.data = {
            "command": list(argv),
            "inputs": {},
            "seed": seed,
            "checks": [],
            "results": {},
            "timings": None,
        }
        self._t0 = time.perf_counter()

    def digest(self, path: str) -> None:
        with open(path, "rb") as fh:
            self.data["inputs"][path] = hashlib.sha256(fh.read()).hexdigest()

    def check(self, name: str, passed: bool, residual=None, detail=None) -> None:
        entry = {"name": name, "passed": bool(passed)}
        if residual is not None:
            entry["residual"] = float(residual)
        if detail is not None:
            entry["detail"] = io.to_jsonable(detail)
        self.data["checks"].append(entry)

    def result(self, key: str, value) -> None:
        self.data["results"][key] = io.to_jsonable(value)

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.data["checks"])

    def finish(self, args) -> int:
        elapsed = time.perf_counter() - self._t0
        print(f"[qmt] finished in {elapsed:.2f}s", file=sys.stderr)
        if getattr(args, "timings", False):
            self.data["timings"] = {"wall_seconds": round(elapsed, 6)}
        text = json.dumps(self.data, indent=2, sort_keys=True) + "\n"
        if getattr(args, "out", None):
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        if getattr(args, "json", False) or not getattr(args, "out", None):
            sys.stdout.write(text)
        for c in self.data["checks"]:
            if not c["passed"]:
                print(f"[qmt] FAILED: {c['name']}", file=sys.stderr)
                return 1
        return 0


def _load_df(path: str, report: _Report) -> DecoherenceFunctional:
    report.digest(path)
    return io.df_from_json(io.load_json(path))


def _df_report(df: DecoherenceFunctional, report: _Report, pattern=None) -> None:
    audit = lp.verify_candidate(df, pattern)
    report.result("marginals", {f"{a},{b}": epr.marginal(df, (a, b)).block
                                for a, b in epr.PAIRS})
    report.check("hermiticity", audit.hermiticity_residual <= 1e-9,
                 audit.hermiticity_residual)
    report.check("normalization", audit.normalization_residual <= 1e-8,
                 audit.normalization_residual)
    report.check("marginals_diagonal", audit.marginals_diagonal,
                 audit.marginal_offdiagonal)
    report.check("weak_positivity", audit.weak.holds, -min(audit.weak.min_mu, 0.0),
                 {"min_mu": audit.weak.min_mu, "zero_count": audit.weak.zero_count,
                  "boundary": audit.weak.boundary})
    report.result("strong_signature", audit.strong.signature)
    report.result("strong_positivity", audit.strong.holds)
    if audit.marginals_diagonal:
        probs = epr.experimental_probabilities(df)
        report.result("probabilities", probs.table)
        report.result("correlators",
                      {f"{a},{b}": epr.correlator(probs, a, b) for a, b in epr.PAIRS})
        report.result("q_by_pattern", audit.q_by_pattern)
        report.result("q_max", audit.q_max)
        report.result("best_pattern", audit.best_pattern)
        report.result("bounds", {"chshb": audit.chshb_satisfied,
                                 "tsirelson": audit.tsirelson_satisfied})
        report.check("nonsignaling", audit.nonsignaling_residual <= 1e-9,
                     audit.nonsignaling_residual)
        report.result("one_sided_marginals", audit.one_sided_marginals)


def _cmd_build(args, argv) -> int:
    report = _Report(argv, args.seed)
    if args.state == "singlet":
        state = quantum.singlet_state()
    else:
        report.digest(args.state)
        state = np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v)
                          for v in io.load_json(args.state)["state"]])
    if args.directions == "default":
        dirs = quantum.standard_directions()
    else:
        report.digest(args.directions)
        d = io.load_json(args.directions)
        dirs = quantum.SpinDirections(np.asarray(d["a"], dtype=float),
                                      np.asarray(d["a'"], dtype=float),
                                      np.asarray(d["b"], dtype=float),
                                      np.asarray(d["b'"], dtype=float))
    if args.kind == "sym":
        df = quantum.build_df_sym(state, dirs)
    elif args.kind == "ordered":
        df = quantum.build_df_ordered(state, dirs)
    else:
        fam = quantum.ProjectorFamily.from_directions(dirs)
        if args.rho == "singlet":
            rho = np.outer(state, state.conj())
        else:
            report.digest(args.rho)
            raw = io.load_json(args.rho)["matrix"]
            rho = np.array([[io._entry_from_json(v) for v in row] for row in raw])
        df = quantum.build_df_commuting(rho, fam)
    if args.df_out:
        io.dump_json(io.df_to_json(df), args.df_out)
    report.result("normalization", complex(df.total).real)
    report.check("normalized", df.is_normalized(1e-8), abs(df.total - 1.0))
    report.result("written", args.df_out)
    return report.finish(args)


def _cmd_epr(args, argv) -> int:
    report = _Report(argv, args.seed)
    df = _load_df(args.input, report)
    _df_report(df, report)
    return report.finish(args)


def _cmd_gns(args, argv) -> int:
    report = _Report(argv, args.seed)
    df = _load_df(args.input, report)
    space = gns.gns_construct(df)
    report.result("rank", space.rank)
    report.result("spectrum", np.sort(np.concatenate(
        [space.eigenvalues, np.zeros(df.space.n_atoms - space.rank)])))
    report.check("gram_reconstruction", space.reconstruction_error() <= 1e-9,
                 space.reconstruction_error())
    try:
        vectors = {s: gns.setting_vector(space, s) for s in epr.SETTINGS}
        table = {f"{s},{t}": gns.inner(space, vectors[s], vectors[t])
                 for s in epr.SETTINGS for t in epr.SETTINGS}
        report.result("setting_norms", {s: float(np.linalg.norm(v))
                                        for s, v in vectors.items()})
        report.result("inner_products", table)
        cert = gns.tsirelson_certificate(space)
        report.result("q_by_pattern", cert.q_by_pattern)
        report.result("pair_bound", cert.pair_bound)
        report.result("bound_margin", cert.bound_margin)
        report.check("tsirelson", cert.q_max <= TSIRELSON + 1e-9,
                     cert.q_max - TSIRELSON)
        report.check("correlator_agreement", cert.correlator_agreement <= 1e-9,
                     cert.correlator_agreement)
    except QmtError as exc:
        report.check("setting_vectors", False, detail=str(exc))
    return report.finish(args)


def _cmd_screening(args, argv) -> int:
    report = _Report(argv, args.seed)
    report.digest(args.input)
    obj = io.load_json(args.input)
    if args.action == "check":
        model = io.structured_model_from_json(obj)
        if model.is_classical:
            rep = screening.check_classical_screening(model)
            report.check("classical_screening", rep.holds,
                         max(rep.outcome_screening, rep.setting_screening,
                             rep.setting_independence))
            report.result("residuals", {
                "outcome_screening": rep.outcome_screening,
                "setting_screening": rep.setting_screening,
                "staged_conditioning": rep.staged_conditioning,
                "setting_independence": rep.setting_independence,
                "setting_past_product": rep.setting_past_product,
            })
        else:
            rep = screening.check_quantal_screening(model)
            report.check("quantal_screening", rep.holds,
                         max(rep.screening, rep.setting_independence))
            report.result("residuals", {
                "screening": rep.screening,
                "setting_independence": rep.setting_independence,
                "cross_products": rep.cross_products,
                "rank_one_defect": rep.rank_one_defect,
            })
    elif args.action == "joint":
        model = io.structured_model_from_json(obj)
        mu_hat = screening.joint_from_screening(model)
        report.result("mu_hat", io.classical_to_json(mu_hat))
        probs = epr.classical_joint_marginals(mu_hat)
        bounds = epr.check_bounds(probs)
        report.result("q_max", bounds.q_max)
        report.check("chshb", bounds.chshb_satisfied, bounds.q_max - 2.0)
        if args.df_out:
            io.dump_json(io.classical_to_json(mu_hat), args.df_out)
    else:  # augment
        w = (io.setting_weights_from_json(obj["setting_weights"])
             if "setting_weights" in obj else screening.SettingWeights.uniform())
        if "mu_hat" in obj:
            mu_hat = io.classical_from_json(obj["mu_hat"])
            model = screening.augment_classical(mu_hat, w)
            rep = screening.check_classical_screening(model)
            report.check("augmented_screens", rep.holds,
                         max(rep.outcome_screening, rep.setting_independence))
        elif "df" in obj:
            df = io.df_from_json(obj["df"])
            model = screening.augment_quantal(df, w)
            rep = screening.check_quantal_screening(model, product_form=False)
            report.check("augmented_screens", rep.holds,
                         max(rep.screening, rep.setting_independence))
        else:
            raise InvalidMeasure("augment input needs 'mu_hat' or 'df'")
        if args.df_out:
            io.dump_json(io.structured_model_to_json(model), args.df_out)
        report.result("n_atoms", model.space.n_atoms)
    return report.finish(args)


def _cmd_lp(args, argv) -> int:
    report = _Report(argv, args.seed)
    pattern = epr.SignPattern.from_string(args.pattern)
    sol = lp.solve_max_q(pattern, mode=args.mode, rational=args.rational,
                         strong_cuts=args.strong_cuts)
    report.result("status", sol.status)
    report.result("objective", sol.objective)
    report.result("rounds", sol.rounds)
    report.result("pivots", sol.pivots)
    report.result("subsets_added", len(sol.added_subsets))
    report.result("eigencuts", sol.eigencuts)
    if sol.status != "optimal":
        report.check("lp_solved", False)
        return report.finish(args)
    if sol.rational_certificate is not None:
        rc = sol.rational_certificate
        report.result("rational_certificate", {
            "feasible_basis": rc["feasible_basis"],
            "chsh_value": str(rc["chsh_value"]),
            "chsh_value_float": rc["chsh_value_float"],
        })
        report.check("rational_basis_feasible", rc["feasible_basis"])
    if args.strong_cuts:
        report.check("toward_tsirelson", sol.objective <= 4.0 - 0.5,
                     sol.objective - TSIRELSON)
    else:
        report.check("q_attains_logical_max", abs(sol.objective - 4.0) <= 1e-6,
                     abs(sol.objective - 4.0))
        report.check("no_violated_subset", sol.final_scan.violation_count == 0,
                     -min(sol.final_scan.min_mu, 0.0))
    df = sol.as_decoherence_functional()
    if args.df_out:
        payload = io.df_to_json(df)
        if args.audit:
            audit = lp.verify_candidate(df, pattern)
            payload["audit"] = {
                "q_max": audit.q_max,
                "weak_positivity": audit.weak.holds,
                "strong_positivity": audit.strong.holds,
                "signature": list(audit.strong.signature),
                "nonsignaling_residual": audit.nonsignaling_residual,
            }
        io.dump_json(payload, args.df_out)
    if args.audit:
        _df_report(df, report, pattern)
    return report.finish(args)


def _cmd_check(args, argv) -> int:
    report = _Report(argv, args.seed)
    report.digest(args.input)
    obj = io.load_json(args.input)
    try:
        df = io.df_from_json(obj, validate=False)
    except InvalidMeasure as exc:
        raise SystemExit(f"[qmt] bad input: {exc}") from exc
    herm = float(np.abs(df.matrix - df.matrix.conj().T).max())
    report.check("hermiticity", herm <= 1e-9, herm)
    diag = np.diag(df.matrix)
    report.check("diagonal_real_nonnegative",
                 float(np.abs(diag.imag).max()) <= 1e-10
                 and float(diag.real.min()) >= -1e-10)
    report.check("normalization", abs(df.total - 1.0) <= 1e-8, abs(df.total - 1.0))
    if herm <= 1e-9:
        weak = check_weak_positivity(df)
        strong = check_strong_positivity(df)
        report.check("weak_positivity", weak.holds)
        report.result("weak_min_mu", weak.min_mu)
        report.result("strong_positivity", strong.holds)
        report.result("strong_signature", strong.signature)
        if df.space.n_atoms == 16 and df.space == epr.SCENARIO.space:
            try:
                probs = epr.experimental_probabilities(df)
                bounds = epr.check_bounds(probs)
                report.result("q_max", bounds.q_max)
                report.check("chshb_or_tsirelson_documented", True,
                             detail={"chshb": bounds.chshb_satisfied,
                                     "tsirelson": bounds.tsirelson_satisfied})
                report.check("nonsignaling", epr.check_nonsignaling(probs),
                             epr.nonsignaling_residual(probs))
            except QmtError as exc:
                report.check("marginals_diagonal", False, detail=str(exc))
    return report.finish(args)


def _cmd_reproduce(args, argv) -> int:
    report = _Report(argv, args.seed)
    target = args.target
    rng = np.random.default_rng(args.seed)
    if target == "sym-spectrum":
        df = quantum.build_df_sym()
        closed = quantum.df_sym_closed_form_matrix()
        dev = float(np.abs(df.matrix - closed).max())
        report.check("matrix_equals_closed_form", dev < 1e-12, dev)
        from .positivity import eigensignature
        sig = eigensignature(df)
        report.result("signature", sig)
        report.check("signature_0_12_4", sig == (0, 12, 4))
        space = gns.gns_construct(df)
        report.result("gns_rank", space.rank)
        report.check("gns_rank_4", space.rank == 4)
    elif target == "tsirelson-saturation":
        df = quantum.build_df_sym()
        probs = epr.experimental_probabilities(df)
        pattern, q = epr.max_chsh_q(probs)
        report.result("q_max", q)
        report.result("pattern", str(pattern))
        report.check("q_is_2sqrt2", abs(q - TSIRELSON) < 1e-10, abs(q - TSIRELSON))
        report.check("minus_on_last_pair", str(pattern) == "+++-")
        cert = gns.tsirelson_certificate(gns.gns_construct(df))
        report.check("inner_products_match", cert.correlator_agreement <= 1e-9,
                     cert.correlator_agreement)
        report.result("bound_margin", cert.bound_margin)
    elif target == "section5":
        df = lp.section5_example()
        audit = lp.verify_candidate(df, epr.SignPattern.from_string("+-++"))
        report.check("hermitian", audit.hermiticity_residual == 0.0)
        report.check("normalized", audit.normalization_residual == 0.0)
        report.check("marginals_diagonal", audit.marginals_diagonal,
                     audit.marginal_offdiagonal)
        report.check("weak_positivity", audit.weak.holds)
        report.check("weak_boundary", audit.weak.boundary)
        report.check("strong_fails", not audit.strong.holds)
        report.check("signature_4_8_4", audit.strong.signature == (4, 8, 4))
        report.check("q_equals_4", abs(audit.q_for_pattern - 4.0) < 1e-12)
        ones = np.array(list(audit.one_sided_marginals.values()))
        report.check("one_sided_marginals_half", float(np.abs(ones - 0.5).max()) < 1e-12)
        report.result("q_by_pattern", audit.q_by_pattern)
    elif target == "lp-max":
        patterns = ([epr.SignPattern.from_string(args.pattern)]
                    if args.pattern else list(epr.ADMISSIBLE_PATTERNS))
        for pat in patterns:
            sol = lp.solve_max_q(pat)
            ok = (sol.status == "optimal" and abs(sol.objective - 4.0) <= 1e-6
                  and sol.final_scan.violation_count == 0)
            report.check(f"lp_max_{pat}", ok, abs(sol.objective - 4.0))
    elif target == "screening-roundtrip":
        worst = 0.0
        for _ in range(args.trials):
            model = screening.random_screening_model(rng, int(rng.integers(1, 5)))
            mu_hat = screening.joint_from_screening(model)
            probs = epr.classical_joint_marginals(mu_hat)
            cond = screening.conditional_experimental_probabilities(model)
            worst = max(worst, float(np.abs(probs.table - cond.table).max()))
            back = screening.augment_classical(mu_hat, model.setting_weights())
            rep = screening.check_classical_screening(back)
            if not rep.holds:
                worst = max(worst, 1.0)
        report.check("classical_roundtrip", worst < 1e-12, worst)
        dfq = quantum.build_df_sym()
        mq = screening.augment_quantal(dfq, screening.SettingWeights.uniform())
        repq = screening.check_quantal_screening(mq, product_form=False)
        report.check("quantal_screening", repq.holds,
                     max(repq.screening, repq.setting_independence))
        strong = check_strong_positivity(mq.measure)
        report.check("augmented_strongly_positive", strong.holds)
    else:
        raise SystemExit(f"[qmt] unknown reproduce target {target!r}")
    return report.finish(args)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=None,
                        help="override check tolerance where applicable")
    parser.add_argument("--seed", type=int, default=0, help="PRNG seed (PCG64)")
    parser.add_argument("--out", default=None, help="write the JSON report here")
    parser.add_argument("--json", action="store_true",
                        help="print the JSON report to stdout")
    parser.add_argument("--timings", action="store_true",
                        help="include wall-clock timings in the report "
                             "(breaks byte-reproducibility)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmt",
        description="Quantal measure theory toolkit: decoherence functionals, "
                    "positivity, GNS spaces, CHSH machinery, screening models, "
                    "and the max-Q linear program.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a joint decoherence functional")
    p.add_argument("kind", choices=["sym", "ordered", "commuting"])
    p.add_argument("--directions", default="default")
    p.add_argument("--state", default="singlet")
    p.add_argument("--rho", default="singlet",
                   help="density matrix JSON for 'commuting'")
    p.add_argument("--df-out", dest="df_out", default=None,
                   help="write the matrix JSON here")
    _common(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("epr", help="marginals, probabilities, correlators, bounds")
    p.add_argument("--input", required=True)
    _common(p)
    p.set_defaults(func=_cmd_epr)

    p = sub.add_parser("gns", help="inner-product space and CHSH certificate")
    p.add_argument("--input", required=True)
    _common(p)
    p.set_defaults(func=_cmd_gns)

    p = sub.add_parser("screening", help="screening-off checks and constructions")
    p.add_argument("action", choices=["check", "joint", "augment"])
    p.add_argument("--input", required=True)
    p.add_argument("--df-out", dest="df_out", default=None)
    _common(p)
    p.set_defaults(func=_cmd_screening)

    p = sub.add_parser("lp", help="maximize the CHSH quantity over weakly "
                                  "positive joint functionals")
    p.add_argument("action", choices=["max-q"])
    p.add_argument("--pattern", default="a'b-")
    p.add_argument("--mode", choices=["real", "complex"], default="real")
    p.add_argument("--audit", action="store_true")
    p.add_argument("--rational", action="store_true",
                   help="exact rational re-verification of the final basis")
    p.add_argument("--strong-cuts", dest="strong_cuts", action="store_true",
                   help="diagnostic: drive the relaxation toward strong "
                        "positivity with eigenvector cuts")
    p.add_argument("--df-out", dest="df_out", default=None)
    _common(p)
    p.set_defaults(func=_cmd_lp)

    p = sub.add_parser("check", help="full audit of a matrix JSON file")
    p.add_argument("input")
    _common(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("reproduce", help="run a named end-to-end pipeline")
    p.add_argument("target", choices=["sym-spectrum", "tsirelson-saturation",
                                      "section5", "lp-max", "screening-roundtrip"])
    p.add_argument("--pattern", default=None)
    p.add_argument("--trials", type=int, default=25)
    _common(p)
    p.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args, argv)
    except (InvalidMeasure, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"[qmt] input error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 2
        return exc.code if isinstance(exc.code, int) else 2
    except QmtError as exc:
        print(f"[qmt] check failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
