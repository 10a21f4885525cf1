# /common/src/common/models.py

from fractions import Fraction
from typing import Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

# 布尔代数的元素: 有限后端为原子位掩码(int), Cantor后端为规范化的二进制串节点集合。
# Python类型本身充当后端标签。
Element = Union[int, frozenset[str]]


class ReportModel(BaseModel):
    """所有报告模型的基类: 不可变, 允许Fraction等精确类型。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class PackingResult(ReportModel):
    """上闭族内最大不交反链的搜索结果。"""

    size: int = Field(..., ge=0)
    witness: Tuple[Element, ...] = ()
    # exact=False 表示步数预算耗尽, size只是已找到的下界("unknown beyond bound")
    exact: bool = True
    steps: int = 0


class AxiomViolation(ReportModel):
    axiom: Literal["boundary", "monotone", "subadditive", "strictly_positive"]
    a: Element
    b: Optional[Element] = None
    value_a: Fraction
    value_b: Optional[Fraction] = None
    # 次可加性反例时为 m(a∨b)
    value_join: Optional[Fraction] = None


class AxiomReport(ReportModel):
    passed: bool
    mode: Literal["exhaustive", "sampled"]
    checked_pairs: int = 0
    violation: Optional[AxiomViolation] = None
    # 公理(v): 不交元素上的有限可加性, 只报告, 不作为通过条件
    finitely_additive: Optional[bool] = None
    additivity_witness: Optional[Tuple[Element, Element]] = None
    notes: Tuple[str, ...] = ()


class ExhaustivityResult(ReportModel):
    index: Optional[int] = None
    horizon_exhausted: bool = False
    sampled: int = 0
    trailing_max: Optional[Fraction] = None
    # 声明的单调包络在index处已低于eps, 且采样项都没有超出包络
    certified: bool = False
    # 第一个超出声明包络的下标; 包络只是关于(流, 子测度)的声明, 不成立时不作证书
    envelope_violation: Optional[int] = None


class GradedCheck(ReportModel):
    level: int
    graded: bool
    witness_a: Optional[Element] = None
    witness_b: Optional[Element] = None
    sampled: bool = False


class FragmentationReport(ReportModel):
    valid: bool
    levels: int
    issues: Tuple[str, ...] = ()


class GradingIndices(ReportModel):
    """n ↦ 最小的k使得 U_k ∨ U_k ⊆ U_n; None表示在L以内不存在。"""

    indices: Dict[int, Optional[int]]

    @property
    def complete(self) -> bool:
        return all(k is not None for k in self.indices.values())


class MembershipResult(ReportModel):
    status: Literal["member", "not_member", "unknown"]
    # (part, level) 对; 各part两两不交, 其并为目标元素
    witness: Optional[Tuple[Tuple[Element, int], ...]] = None
    steps: int = 0

    @property
    def member(self) -> bool:
        return self.status == "member"


class SandwichRow(ReportModel):
    element: Element
    n0: int
    value: Fraction
    lower: Fraction
    upper: Fraction
    ok: bool


class ConstructionReport(ReportModel):
    passed: bool
    axioms: AxiomReport
    strictly_positive: bool
    positivity_witness: Optional[Element] = None
    sandwich: Tuple[SandwichRow, ...] = ()
    sandwich_violations: int = 0
    # n ↦ {a : m(a) ≥ 2^-n} 中反链的最大规模; None表示预算耗尽
    level_bounds: Dict[int, Optional[int]] = Field(default_factory=dict)
    notes: Tuple[str, ...] = ()


class IdealCheckReport(ReportModel):
    horizon: int
    envelope_ok: bool
    violation_index: Optional[int] = None
    violation_value: Optional[Fraction] = None
    violation_bound: Optional[Fraction] = None
    # 派生序列检查: "subsequence", "dominated", "join", "meet_is_zero"
    checks: Dict[str, bool] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.envelope_ok and all(self.checks.values())


class ConcentrationPick(ReportModel):
    n: int
    element: Element
    value: Fraction
    envelope: Fraction


class ConcentrationReport(ReportModel):
    status: Literal["certified", "empirical", "not_concentrated"]
    picks: Tuple[ConcentrationPick, ...]
    # 报告的包络为 envelope_scale / n
    envelope_scale: Fraction


class IntersectionResult(ReportModel):
    value: Fraction
    # 原始证书: 原子权重向量, 非负且和为1
    mu: Tuple[Fraction, ...]
    # 对偶证据: 成员序列, 其比值 ≥ value(弱对偶)
    dual_sequence: Tuple[Element, ...] = ()
    dual_ratio: Optional[Fraction] = None
    generators: int = 0
    # 求解时实际进入LP的生成元约束数(其余生成元在最优解处自动满足)
    cuts: int = 0


class KelleyLevel(ReportModel):
    level: int
    bound: int
    value: Fraction
    floor: Fraction
    reference_floor: Optional[Fraction] = None


class MeasureReport(ReportModel):
    weights: Tuple[Fraction, ...]
    strictly_positive: bool
    levels: Tuple[KelleyLevel, ...]


class WeakDualityReport(ReportModel):
    """随机成员序列的比值都应 ≥ Kelley值; violations必须为0。"""

    samples: int
    violations: int
    least_ratio: Optional[Fraction] = None
    worst_sequence: Tuple[Element, ...] = ()
