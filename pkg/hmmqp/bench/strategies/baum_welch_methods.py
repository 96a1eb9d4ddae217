"""
Métodos con Baum-Welch (1, 4, 5, 6, 7)
Se diferencian en el punto de partida de theta y de A
"""
from ...core.baseline import BaumWelchInit, baum_welch, random_init
from ...core.model import DiscreteOutputModel, TransitionMatrix
from .base import MethodOutcome, RunContext, align_to_truth, relabel


def _run_bw(ctx: RunContext, method_id: int, init: BaumWelchInit, stages) -> MethodOutcome:
    stage = f"bw_{method_id}"
    result = ctx.stage(stage, lambda: baum_welch(ctx.y, ctx.spec.n, init, ctx.config.bw_iters))
    perm = align_to_truth(result.outputs_hat, ctx.spec)
    return MethodOutcome(
        A_hat=relabel(result.A_hat.entries, perm),
        stages=tuple(stages) + (stage,),
        permutation=perm,
        A_trace=[relabel(A, perm) for A in result.A_trace],
    )


class RandomBaumWelch:
    """Método 1: theta y A aleatorios"""

    method_id = 1
    label = "BW aleatorio"

    def run(self, ctx: RunContext) -> MethodOutcome:
        m = ctx.spec.outputs.m if isinstance(ctx.spec.outputs, DiscreteOutputModel) else None
        init = random_init(ctx.spec.n, ctx.method_seed(self.method_id), y=ctx.y, m=m)
        return _run_bw(ctx, self.method_id, init, ())


class QPInitBaumWelch:
    """Métodos 4 y 5: BW desde A_hat del QP, con salidas exactas (fijas) o del EM"""

    def __init__(self, known_outputs: bool):
        self.known_outputs = known_outputs
        self.method_id = 4 if known_outputs else 5
        self.label = "QP + BW, salidas exactas" if known_outputs else "EM + QP + BW"

    def run(self, ctx: RunContext) -> MethodOutcome:
        if self.known_outputs:
            report = ctx.qp_known()
            outputs0 = ctx.spec.outputs
            stages = ("qp_known",)
        else:
            report = ctx.qp_em()
            outputs0 = ctx.mixture().to_outputs()
            stages = ("em", "qp_em")
        init = BaumWelchInit(
            A0=TransitionMatrix(report.A_hat),
            outputs0=outputs0,
            fix_outputs=self.known_outputs,
        )
        return _run_bw(ctx, self.method_id, init, stages)


class RandomABaumWelch:
    """Métodos 6 y 7: A aleatoria, salidas exactas (fijas) o del EM"""

    def __init__(self, known_outputs: bool):
        self.known_outputs = known_outputs
        self.method_id = 6 if known_outputs else 7
        self.label = "BW, salidas exactas, A aleatoria" if known_outputs else "EM + BW, A aleatoria"

    def run(self, ctx: RunContext) -> MethodOutcome:
        if self.known_outputs:
            outputs0 = ctx.spec.outputs
            stages = ()
        else:
            outputs0 = ctx.mixture().to_outputs()
            stages = ("em",)
        init = random_init(
            ctx.spec.n,
            ctx.method_seed(self.method_id),
            outputs0=outputs0,
            fix_outputs=self.known_outputs,
        )
        return _run_bw(ctx, self.method_id, init, stages)
