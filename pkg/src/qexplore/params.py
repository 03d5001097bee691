from __future__ import annotations

from dataclasses import asdict, dataclass

from .bsdelta import LQCoefficients
from .continuous import ClosedFormSolution
from .filtering import OUParams


@dataclass(frozen=True)
class ModelParams:
    """Scalar coefficients of one constant-coefficient problem instance.

    ``x0`` is the common starting value of the observed and controlled states.
    """

    B: float = 1.0
    C: float = 1.0
    D: float = 1.0
    K: float = 0.1
    gamma: float = 1.0
    sigma: float = 0.2
    kappa: float = 1.0
    eta: float = 2.0
    A0_mean: float = 0.0
    Sigma0: float = 1.0
    T: float = 1.0
    x0: float = 1.0

    def coefficients(self, N: int) -> LQCoefficients:
        return LQCoefficients.constant(self.B, self.C, self.D, self.K, self.gamma, self.T, N)

    def ou(self) -> OUParams:
        return OUParams(self.kappa, self.eta, self.sigma, self.A0_mean, self.Sigma0)

    def closed_form(self) -> ClosedFormSolution:
        return ClosedFormSolution(self.B, self.C, self.D, self.K, self.gamma, self.T)

    def to_dict(self) -> dict:
        return asdict(self)


# Default parameter set used by the path, convergence and approximation experiments.
DEFAULT_PARAMS = ModelParams()
