# /cli/src/cli/app.py

"""
批处理命令行: 读取规格文件, 调用engine的校验与构造, 输出报告。

stdout只输出机器可读的 key=value 行, 说明文字和日志走stderr。
退出码: 0 通过, 1 性质不成立(附可复查的证据), 2 输入错误。
"""

import functools
import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional

import click
import structlog
from common.logging import configure_logging, get_logger
from common.models import AxiomViolation, Element
from engine.algebra import (
    BooleanAlgebra,
    CantorAlgebra,
    FiniteAlgebra,
    max_disjoint_packing,
    upward_closure,
)
from engine.config import get_settings as get_engine_settings
from engine.construction import construct_submeasure, verify_construction
from engine.errors import (
    AlgebraInputError,
    BudgetExhaustedError,
    EngineError,
    EnvelopeViolationError,
    FormatError,
    GradingError,
    StreamInputError,
)
from engine.formats import dump_lp_certificate, dump_table
from engine.fragmentation import (
    Fragmentation,
    check_graded,
    check_sigma_cc,
    find_grading_indices,
    graded_subfragmentation,
)
from engine.ideal import (
    block_antichains,
    choice_functions_from_submeasure,
    concentration_witness,
    depth_antichains,
    diagonal_select,
    envelope_from_table,
    random_null_stream,
)
from engine.kelley import intersection_number, measure_from_fragmentation, sample_weak_duality
from engine.streams import AntichainStream
from engine.submeasure import (
    Submeasure,
    check_axioms,
    exhaustivity_profile,
    is_exhaustive_on,
    level_family,
)
from pydantic import ValidationError

from .config import get_settings
from .specfile import (
    SpecFile,
    build_algebra,
    build_family,
    build_fragmentation,
    build_stream_script,
    build_submeasure,
    load_spec,
)

log = get_logger(__name__)

DEFAULT_EPSILON = Fraction(1, 8)


# --- 输出 ---------------------------------------------------------------------


def format_element(a: Element) -> str:
    if isinstance(a, frozenset):
        return CantorAlgebra().format(a)
    return f"{a:#x}"


def _text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    return str(value)


def emit(fields: Mapping[str, Any]) -> None:
    """一行 key=value; 元素需要调用方先格式化。"""
    click.echo(" ".join(f"{key}={_text(value)}" for key, value in fields.items()))


def emit_elements(key: str, xs: Iterable[Element]) -> None:
    emit({key: ",".join(format_element(x) for x in xs) or "none"})


def say(message: str) -> None:
    click.echo(message, err=True)


def _violation_fields(v: AxiomViolation) -> dict[str, Any]:
    fields: dict[str, Any] = {"axiom": v.axiom, "a": format_element(v.a), "value_a": v.value_a}
    if v.b is not None:
        fields.update(b=format_element(v.b), value_b=v.value_b)
    if v.value_join is not None:
        fields["value_join"] = v.value_join
    return fields


# --- 运行上下文 ---------------------------------------------------------------


@dataclass
class Workbench:
    """一次调用的全局选项; 规格在命令内部惰性加载, 使加载错误也走统一的退出码。"""

    spec_path: Path
    out: Optional[Path]
    horizon_option: Optional[int]
    budget_option: Optional[int]
    seed: int
    jobs: Optional[int]

    @cached_property
    def spec(self) -> SpecFile:
        return load_spec(self.spec_path)

    @property
    def horizon(self) -> int:
        return self.horizon_option or self.spec.horizon or get_settings().DEFAULT_HORIZON

    @property
    def budget(self) -> int:
        return self.budget_option or self.spec.budget or get_engine_settings().BUDGET_STEPS

    @cached_property
    def algebra(self) -> BooleanAlgebra:
        return build_algebra(self.spec)

    @cached_property
    def submeasure(self) -> Submeasure:
        return build_submeasure(self.spec, self.algebra, budget=self.budget)

    @cached_property
    def fragmentation(self) -> Fragmentation:
        clause = self.spec.fragmentation
        # 文件给出的碎片化不需要子测度
        m = None if clause is not None and clause.kind == "file" else self.submeasure
        return build_fragmentation(self.spec, self.algebra, m)

    def finite_algebra(self, command: str) -> FiniteAlgebra:
        if not isinstance(self.algebra, FiniteAlgebra):
            raise AlgebraInputError(f"{command} needs a finite algebra")
        return self.algebra

    def write_out(self, text: str) -> None:
        """有--out时写文件, 否则把文件内容直接写到stdout。"""
        if self.out is None:
            click.echo(text, nl=False)
        else:
            self.out.write_text(text, encoding="utf-8")
            say(f"wrote {self.out}")


def report_command(fn: Callable[..., int]) -> Callable[..., None]:
    """统一的上下文绑定与退出码映射。"""

    @functools.wraps(fn)
    @click.pass_obj
    def wrapper(wb: Workbench, **kwargs: Any) -> None:
        command = click.get_current_context().info_name
        structlog.contextvars.bind_contextvars(command=command)
        try:
            code = fn(wb, **kwargs)
        except GradingError as e:
            fields: dict[str, Any] = {"graded": False, "level": e.level}
            if e.witness is not None and all(x is not None for x in e.witness):
                fields.update(witness_a=format_element(e.witness[0]), witness_b=format_element(e.witness[1]))
            emit(fields)
            say(str(e))
            code = 1
        except EnvelopeViolationError as e:
            emit({"error": "envelope", "index": e.index, "value": e.value, "bound": e.bound})
            say(str(e))
            code = 2
        except StreamInputError as e:
            emit({"error": "stream", "pair": f"{e.pair[0]},{e.pair[1]}"})
            say(str(e))
            code = 2
        except BudgetExhaustedError as e:
            emit({"error": "budget", "steps": e.steps})
            say(str(e))
            code = 2
        except FormatError as e:
            emit({"error": "format", "line": e.line_no})
            say(str(e))
            code = 2
        except EngineError as e:
            emit({"error": "input"})
            say(str(e))
            code = 2
        except ValidationError as e:
            emit({"error": "spec"})
            say(str(e))
            code = 2
        except OSError as e:
            emit({"error": "file"})
            say(str(e))
            code = 2
        finally:
            structlog.contextvars.unbind_contextvars("command")
        log.info("Command finished.", command=command, exit_code=code)
        sys.exit(code)

    return wrapper


# --- 命令组 -------------------------------------------------------------------


@click.group()
@click.option("--spec", "spec_path", required=True, type=click.Path(path_type=Path), help="Spec file.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Output file.")
@click.option("--horizon", type=click.IntRange(min=1), default=None, help="Horizon for stream checks.")
@click.option("--budget-steps", type=click.IntRange(min=1), default=None, help="Search step budget.")
@click.option("--seed", type=int, default=None, help="Seed for randomized checks.")
@click.option("--jobs", type=click.IntRange(min=1), default=None, help="Parallel scan partitions.")
@click.pass_context
def cli(
    ctx: click.Context,
    spec_path: Path,
    out: Optional[Path],
    horizon: Optional[int],
    budget_steps: Optional[int],
    seed: Optional[int],
    jobs: Optional[int],
) -> None:
    """Submeasure workbench: validators and constructions on exact Boolean algebras."""
    settings = get_settings()
    configure_logging(settings.LOG_LEVEL)
    ctx.obj = Workbench(
        spec_path=spec_path,
        out=out,
        horizon_option=horizon,
        budget_option=budget_steps,
        seed=settings.DEFAULT_SEED if seed is None else seed,
        jobs=jobs,
    )


@cli.command("check-axioms")
@report_command
def check_axioms_command(wb: Workbench) -> int:
    m = wb.submeasure
    limit = get_engine_settings().EXHAUSTIVE_MAX_ATOMS
    exhaustive = isinstance(wb.algebra, FiniteAlgebra) and wb.algebra.n_atoms <= limit
    report = check_axioms(m, "exhaustive" if exhaustive else "sampled", seed=wb.seed, jobs=wb.jobs)
    emit({"seed": wb.seed})
    emit(
        {
            "axioms": "pass" if report.passed else "fail",
            "mode": report.mode,
            "pairs": report.checked_pairs,
            "finitely_additive": report.finitely_additive,
        }
    )
    if report.additivity_witness is not None:
        emit_elements("additivity_witness", report.additivity_witness)
    for note in report.notes:
        say(note)
    if report.violation is not None:
        emit(_violation_fields(report.violation))
        return 1
    return 0


@cli.command("construct")
@report_command
def construct_command(wb: Workbench) -> int:
    algebra = wb.finite_algebra("construct")
    f = wb.fragmentation
    m = construct_submeasure(f, budget=wb.budget)
    wb.write_out(dump_table(m, source=f.source))
    emit({"constructed": "ok", "atoms": algebra.n_atoms, "levels": len(f.levels), "top_value": m.eval(algebra.one)})
    return 0


@cli.command("check-graded")
@report_command
def check_graded_command(wb: Workbench) -> int:
    f = wb.fragmentation
    if f.finite:
        levels = range(1, (f.stabilization or 1))
        checks = [check_graded(f, n, jobs=wb.jobs) for n in levels]
    else:
        emit({"seed": wb.seed})
        say("cantor backend: graded pairs are sampled along node refinements")
        checks = [check_graded(f, n, samples=wb.horizon * 10, seed=wb.seed + n) for n in range(1, wb.horizon + 1)]
    failed = False
    for check in checks:
        fields: dict[str, Any] = {"level": check.level, "graded": check.graded}
        if not check.graded:
            failed = True
            fields.update(witness_a=format_element(check.witness_a), witness_b=format_element(check.witness_b))
        emit(fields)
    emit({"graded": not failed, "levels_checked": len(checks)})
    return 1 if failed else 0


@cli.command("sigma-cc")
@report_command
def sigma_cc_command(wb: Workbench) -> int:
    wb.finite_algebra("sigma-cc")
    f = wb.fragmentation
    exact = True
    for n in range(1, len(f.levels) + 1):
        result = check_sigma_cc(f, n, budget=wb.budget)
        exact = exact and result.exact
        emit({"level": n, f"K({n})": result.size, "exact": result.exact, "steps": result.steps})
        emit_elements(f"witness({n})", result.witness)
    if not exact:
        say("budget exhausted: inexact K(n) are lower bounds only")
    return 0 if exact else 1


@cli.command("grading-indices")
@report_command
def grading_indices_command(wb: Workbench) -> int:
    wb.finite_algebra("grading-indices")
    f = wb.fragmentation
    indices = find_grading_indices(f)
    for n, k in sorted(indices.indices.items()):
        emit({f"k({n})": k})
    emit({"complete": indices.complete})
    if not indices.complete:
        missing = next(n for n, k in sorted(indices.indices.items()) if k is None)
        say(f"no k <= L closes U_k under joins into U_{missing}")
        return 1
    sub = graded_subfragmentation(f)
    emit({"selection": ",".join(str(n) for n in sub.selection)})
    return 0


@cli.command("roundtrip")
@report_command
def roundtrip_command(wb: Workbench) -> int:
    f = wb.fragmentation
    m = construct_submeasure(f, budget=wb.budget)
    samples = None if f.finite else wb.horizon * 10
    report = verify_construction(f, m, budget=wb.budget, samples=samples, seed=wb.seed)
    emit({"seed": wb.seed})
    for row in report.sandwich:
        emit(
            {
                "elem": format_element(row.element),
                "n0": row.n0,
                "value": row.value,
                "lower": row.lower,
                "upper": row.upper,
                "ok": row.ok,
            }
        )
    for n, bound in sorted(report.level_bounds.items()):
        emit({f"K({n})": bound})
    emit(
        {
            "roundtrip": "pass" if report.passed else "fail",
            "axioms": "pass" if report.axioms.passed else "fail",
            "strictly_positive": report.strictly_positive,
            "sandwich_violations": report.sandwich_violations,
        }
    )
    if report.axioms.violation is not None:
        emit(_violation_fields(report.axioms.violation))
    if report.positivity_witness is not None:
        emit({"positivity_witness": format_element(report.positivity_witness)})
    for note in report.notes:
        say(note)
    if f.finite and wb.out is not None:
        wb.write_out(dump_table(m, source=f.source))
    return 0 if report.passed else 1


@cli.command("kelley")
@report_command
def kelley_command(wb: Workbench) -> int:
    algebra = wb.finite_algebra("kelley")
    if wb.spec.family:
        family = build_family(wb.spec, algebra)
        result = intersection_number(algebra, family)
        emit(
            {
                "kelley_value": result.value,
                "generators": result.generators,
                "dual_ratio": result.dual_ratio,
                "dual_length": len(result.dual_sequence),
            }
        )
        emit({"mu": ",".join(str(w) for w in result.mu)})
        emit_elements("dual_sequence", result.dual_sequence)
        if wb.out is not None:
            wb.write_out(dump_lp_certificate(result))
        gens = upward_closure(algebra, family).generators
        duality = sample_weak_duality(
            algebra, gens, result.value, get_settings().WEAK_DUALITY_SAMPLES, seed=wb.seed
        )
        emit({"seed": wb.seed})
        emit(
            {
                "weak_duality_samples": duality.samples,
                "weak_duality_violations": duality.violations,
                "least_ratio": duality.least_ratio,
            }
        )
        if duality.violations:
            emit_elements("worst_sequence", duality.worst_sequence)
            return 1
        return 0

    reference = None if wb.spec.fragmentation and wb.spec.fragmentation.kind == "file" else wb.submeasure
    measure, report = measure_from_fragmentation(wb.fragmentation, reference=reference, budget=wb.budget)
    for level in report.levels:
        emit(
            {
                "level": level.level,
                "K": level.bound,
                "value": level.value,
                "floor": level.floor,
                "reference_floor": level.reference_floor,
            }
        )
    emit({"mu": ",".join(str(w) for w in report.weights)})
    emit({"strictly_positive": report.strictly_positive, "finitely_additive": measure.finitely_additive})
    if not report.strictly_positive:
        zero = next(i for i, w in enumerate(report.weights) if w == 0)
        emit({"zero_atom": format_element(algebra.atom(zero))})
        return 1
    return 0


@cli.command("pack")
@report_command
def pack_command(wb: Workbench) -> int:
    algebra = wb.finite_algebra("pack")
    if wb.spec.family:
        family = upward_closure(algebra, build_family(wb.spec, algebra))
    elif wb.spec.epsilon is not None:
        family = level_family(wb.submeasure, wb.spec.epsilon)
    else:
        thresholds = [Fraction(1, 1 << n) for n in range(1, min(wb.horizon, algebra.n_atoms) + 1)]
        profile = exhaustivity_profile(wb.submeasure, thresholds, budget=wb.budget)
        for eps, k in profile.items():
            emit({"eps": eps, "K": k})
        return 0
    result = max_disjoint_packing(family, budget=wb.budget)
    emit({"packing": result.size, "exact": result.exact, "steps": result.steps})
    emit_elements("witness", result.witness)
    if not result.exact:
        say("budget exhausted: packing size is a lower bound only")
        return 1
    return 0


@cli.command("diagonal")
@report_command
def diagonal_command(wb: Workbench) -> int:
    wb.finite_algebra("diagonal")
    m = wb.submeasure
    F = choice_functions_from_submeasure(m)
    families = get_settings().DIAGONAL_STREAMS
    emit({"seed": wb.seed})
    worst = Fraction(0)
    for j in range(families):
        base = wb.seed + 10_000 * j

        def stream(k: int, base: int = base) -> Any:
            return random_null_stream(m, seed=base + k)

        selected = diagonal_select(F, stream, count=wb.horizon)
        for k, a in selected.raw():
            value = m.eval(a)
            if value >= Fraction(1, k):
                emit({"diagonal": "fail", "family": j, "k": k, "element": format_element(a), "value": value})
                return 1
            worst = max(worst, value * k)
    emit({"diagonal": "pass", "families": families, "terms": wb.horizon, "max_scaled": worst})
    return 0


@cli.command("concentrate")
@report_command
def concentrate_command(wb: Workbench) -> int:
    algebra = wb.algebra
    script = build_stream_script(wb.spec, algebra)
    if script is not None:
        schedule: Any = script.schedule()
    elif isinstance(algebra, FiniteAlgebra):
        schedule = block_antichains(algebra, wb.horizon)
    else:
        assert isinstance(algebra, CantorAlgebra)
        schedule = depth_antichains(algebra, wb.horizon)
    report = concentration_witness(wb.submeasure, schedule, wb.horizon)
    for pick in report.picks:
        emit({"n": pick.n, "element": format_element(pick.element), "value": pick.value, "envelope": pick.envelope})
    emit({"concentration": report.status, "envelope_scale": report.envelope_scale})
    return 1 if report.status == "not_concentrated" else 0


@cli.command("exhaustive")
@report_command
def exhaustive_command(wb: Workbench) -> int:
    algebra = wb.algebra
    eps = wb.spec.epsilon if wb.spec.epsilon is not None else DEFAULT_EPSILON
    script = build_stream_script(wb.spec, algebra)
    if script is not None:
        items = [a for _, members in script.schedule() for a in members]
        envelope = envelope_from_table(script.envelope) if script.envelope else None
        stream = AntichainStream(algebra=algebra, source=lambda: iter(items), start=1, envelope=envelope, label="script")
    elif isinstance(algebra, FiniteAlgebra):
        stream = AntichainStream.atoms(algebra)
    else:
        assert isinstance(algebra, CantorAlgebra)
        stream = AntichainStream.depth_nodes(algebra)
    result = is_exhaustive_on(wb.submeasure, stream, eps, wb.horizon)
    emit(
        {
            "eps": eps,
            "index": result.index,
            "certified": result.certified,
            "sampled": result.sampled,
            "trailing_max": result.trailing_max,
        }
    )
    if result.envelope_violation is not None:
        emit({"envelope_violation": result.envelope_violation})
        say(f"stream term {result.envelope_violation} exceeds the declared envelope; result is not certified")
    if result.horizon_exhausted:
        emit({"horizon_exhausted": True})
        say(f"no tail below eps={eps} within horizon {wb.horizon}")
        return 1
    return 0


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
