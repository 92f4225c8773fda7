"""Two-dimensional funnel: y | q1, q2 ~ N(q2, exp(-3 q1)), q1, q2 ~ N(0, 1)."""
from .. import autodiff as ad
from .. import linalg as la
from ..transform import identity_block
from .base import LOG_2PI, ModelSpec, const_metric, vec1


def funnel_model(y1=0.5):
    """Funnel with blocks (q1, q2) and G = diag(1 + 9/2, 1 + exp(3 q1)).

    h-strategies: ``zero`` and ``E`` (h2 = E(q2 | y, q1) = y / (1 + exp(-3 q1))).
    """
    y1 = float(y1)

    def terms(qs):
        q1 = qs[0][0]
        q2 = qs[1][0]
        return [
            ("q1", -0.5 * LOG_2PI - 0.5 * q1 * q1),
            ("q2", -0.5 * LOG_2PI - 0.5 * q2 * q2),
            ("y", -0.5 * LOG_2PI + 1.5 * q1 - 0.5 * ad.exp(3.0 * q1) * (y1 - q2) ** 2),
        ]

    def g2(prefix):
        return la.DiagSym(vec1(1.0 + ad.exp(3.0 * prefix[0][0])))

    def h2_cond(prefix, factor):
        return vec1(y1 / (1.0 + ad.exp(-3.0 * prefix[0][0])))

    names, dims = ("q1", "q2"), (1, 1)
    return ModelSpec(
        name="funnel",
        names=names,
        dims=dims,
        terms=terms,
        metrics=[const_metric(1.0 + 4.5), g2],
        locations={"zero": [None, None], "E": [None, h2_cond]},
        default_h="E",
        data={"y1": y1},
        # both priors are standard normal already, so prior standardisation is the identity
        prior_std=lambda: [identity_block(n, d) for n, d in zip(names, dims)],
    )
