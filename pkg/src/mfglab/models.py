"""Model data for the two built-in mean field games.

Both games share the quadratic Hamiltonian H(x,p) = |p|^2 / 2.  The first is a
torus game with a local coupling F(x,m) = gamma*m + U(x); the second is a
linear-quadratic game on an interval whose coupling acts through the
population mean.  All evaluation routines are pure functions of the model
parameters and accept scalars or numpy arrays.
"""

from dataclasses import dataclass, field
import math

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LocalCouplingModel:
    """Torus MFG with attractive local coupling and a fixed background potential.

    F(x, m) = gamma * m + U(x) with
    U(x) = A * (c1*cos(2 pi x) + c2*cos(4 pi x) + c3*sin(2 pi (x - pi/8))),
    terminal cost G(x) = psi * sin(2 pi (x + 1/4)), and a Gaussian initial
    density centred at mu0 renormalised over [0, 1].  The viscosity is fixed
    at 1/2; the residual losses hard-code the same factor, so exposing it
    would let the two drift apart.
    """

    gamma: float = 1.0
    potential_amplitude: float = 50.0
    potential_coeffs: tuple = (0.1, 1.0, 0.1)
    psi: float = 1.0
    mu0: float = 0.5
    sigma0: float = 0.2
    T: float = 5.0
    d: int = 1
    _m0_norm: float = field(init=False, repr=False, default=0.0)

    kappa = 0.5

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0 (strengthened monotonicity)")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be > 0")
        if self.T <= 0:
            raise ValueError("T must be > 0")
        if self.d != 1:
            raise ValueError("built-in local model is 1-D")
        # Normalising constant of m0 by composite Simpson on 2001 nodes.
        xs = np.linspace(0.0, 1.0, 2001)
        norm = simpson(self._m0_kernel(xs), xs)
        object.__setattr__(self, "_m0_norm", float(norm))

    def potential(self, x):
        c1, c2, c3 = self.potential_coeffs
        x = np.asarray(x, dtype=float)
        return self.potential_amplitude * (
            c1 * np.cos(TWO_PI * x)
            + c2 * np.cos(2.0 * TWO_PI * x)
            + c3 * np.sin(TWO_PI * (x - math.pi / 8.0))
        )

    def coupling(self, x, m_val):
        """F(x, m) = gamma * m(x) + U(x)."""
        return self.gamma * np.asarray(m_val, dtype=float) + self.potential(x)

    def coupling_dm(self, x, m_val):
        """dF/dm, constant in m for the affine coupling."""
        return np.broadcast_to(self.gamma, np.shape(m_val)).astype(float)

    def terminal_cost(self, x):
        """G(x) = psi * sin(2 pi (x + 1/4)); no density dependence."""
        return self.psi * np.sin(TWO_PI * (np.asarray(x, dtype=float) + 0.25))

    def _m0_kernel(self, x):
        z = (np.asarray(x, dtype=float) - self.mu0) / self.sigma0
        return np.exp(-0.5 * z * z)

    def initial_density(self, x):
        """Gaussian kernel renormalised to unit mass over [0, 1]."""
        return self._m0_kernel(x) / self._m0_norm


def simpson(y, x):
    """Composite Simpson rule on a uniform grid with an odd node count."""
    n = len(x) - 1
    if n % 2 != 0:
        raise ValueError("Simpson rule needs an even number of intervals")
    h = (x[-1] - x[0]) / n
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return h / 3.0 * float(np.dot(w, y))


@dataclass(frozen=True)
class LQModel:
    """Linear-quadratic MFG on [-L, L] with mean-field interaction through the mean.

    Running cost f(x,a,m) = (Q x^2 + B (x - mean(m))^2 + a^2) / 2 and terminal
    cost Psi (x - r)^2.  Derived quantities follow the ergodic matching
    q = (Q+B)/2, beta = -B, gamma_erg = B/2.  The closed-form trajectory
    branch requires sqrt(Q+B) = 2 Psi; `semi_explicit` records whether the
    instance is on it.
    """

    Q: float = 2.0
    B: float = 2.0
    Psi: float = 1.0
    r: float = 1.0
    sigma: float = 1.0
    T: float = 10.0
    L: float = 3.0
    mu0: float = 1.0
    sigma0: float = 0.2

    def __post_init__(self):
        if self.Q <= 0:
            raise ValueError("Q must be > 0")
        if self.B < 0:
            raise ValueError("B must be >= 0")
        if self.Psi <= 0:
            raise ValueError("Psi must be > 0")
        if self.sigma <= 0 or self.sigma0 <= 0:
            raise ValueError("sigma and sigma0 must be > 0")
        if self.T <= 0 or self.L <= 0:
            raise ValueError("T and L must be > 0")
        if self.q <= 0 or 2.0 * self.q == -self.beta:
            raise ValueError("ergodic closed form needs q > 0 and 2q != -beta")

    @property
    def C(self):
        return self.Q + self.B

    @property
    def sqrtC(self):
        return math.sqrt(self.C)

    @property
    def gamma_ric(self):
        """Terminal value of the Riccati variable, 2 Psi."""
        return 2.0 * self.Psi

    @property
    def omega(self):
        """Exponential turnpike rate sqrt(C - B) = sqrt(Q)."""
        return math.sqrt(self.C - self.B)

    @property
    def nu(self):
        return 0.5 * self.sigma ** 2

    @property
    def q(self):
        return 0.5 * (self.Q + self.B)

    @property
    def beta(self):
        return -self.B

    @property
    def gamma_erg(self):
        return 0.5 * self.B

    @property
    def s(self):
        return 1.0 / math.sqrt(2.0 * self.q)

    @property
    def semi_explicit(self):
        """True when sqrt(C) = 2 Psi, the branch with closed-form (mu, chi)."""
        return abs(self.sqrtC - self.gamma_ric) <= 1e-12 * max(1.0, self.sqrtC)

    def running_cost(self, x, a, mean):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self.Q * x * x + self.B * (x - mean) ** 2 + np.asarray(a, float) ** 2)

    def terminal_cost(self, x):
        return self.Psi * (np.asarray(x, dtype=float) - self.r) ** 2

    def coupling_mean(self, x, mean):
        """F[m](x) = (Q x^2 + B (x - mean)^2) / 2, the HJB right-hand side."""
        x = np.asarray(x, dtype=float)
        return 0.5 * (self.Q * x * x + self.B * (x - mean) ** 2)

    def initial_density(self, x):
        z = (np.asarray(x, dtype=float) - self.mu0) / self.sigma0
        return np.exp(-0.5 * z * z) / (self.sigma0 * math.sqrt(2.0 * math.pi))


def lq_costs(model, x, a, mean):
    """(running, terminal) cost pair of the LQ game at one point."""
    return model.running_cost(x, a, mean), model.terminal_cost(x)
