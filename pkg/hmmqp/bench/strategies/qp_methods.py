"""
Métodos sin Baum-Welch: QP con salidas exactas (2) y QP tras EM (3)
"""
from .base import MethodOutcome, RunContext, relabel


class KnownOutputsQP:
    """Método 2: parámetros de salida exactos, pi y A por QP"""

    method_id = 2
    label = "QP, salidas exactas"

    def run(self, ctx: RunContext) -> MethodOutcome:
        report = ctx.qp_known()
        return MethodOutcome(
            A_hat=report.A_hat,
            stages=("qp_known",),
            permutation=tuple(range(ctx.spec.n)),
            pi_hat=report.pi_hat,
        )


class MixtureQP:
    """Método 3: salidas por EM (alineadas), pi y A por QP"""

    method_id = 3
    label = "EM + QP"

    def run(self, ctx: RunContext) -> MethodOutcome:
        report = ctx.qp_em()
        perm = tuple(report.errors["permutation"]) if report.errors else tuple(range(ctx.spec.n))
        return MethodOutcome(
            A_hat=relabel(report.A_hat, perm),
            stages=("em", "qp_em"),
            permutation=perm,
            pi_hat=report.pi_hat[list(perm)],
        )
