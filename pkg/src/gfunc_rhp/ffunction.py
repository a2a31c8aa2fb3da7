"""Jump functions f(z, beta) with derivatives in z and beta.

Built in: the semiclassical NLS f for the sech family (beta = (mu, x, t)),
polynomial fixtures with coefficients affine in beta, a toy
c(mu)(z - z0(mu)) log(z - z0(mu)), and a translation wrapper f(z - s).

All evaluators are vectorized over z.  ``k`` selects a parameter either by
name or by its 1-based position (k = 1 is the parameter that moves z0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "FunctionDomainError",
    "SingularPointError",
    "JumpFunction",
    "NLSParameters",
    "NLSJumpFunction",
    "PolynomialJumpFunction",
    "ToyLogJumpFunction",
    "TranslatedJumpFunction",
    "AugmentedJumpFunction",
    "nls_T",
    "nls_f",
    "nls_f_prime",
    "nls_f_mu",
    "nls_jump_function",
    "synthetic_polynomial_f",
    "appendix_toy_f",
    "toy_integral",
    "toy_integral_dmu",
    "T_SWITCH",
]

T_SWITCH = 1e-2
_SERIES_RATIO = 0.15
_SERIES_TERMS = 8


class FunctionDomainError(ValueError):
    """Parameters outside the domain of the jump function."""


class SingularPointError(ValueError):
    """z is a singular point of f or lies on one of its cuts."""


def _as_z(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def _ret(z, out):
    return complex(out) if np.ndim(z) == 0 else out


class JumpFunction:
    """Interface for f(z, beta).  Subclasses implement the vectorized hooks."""

    name: str = "f"
    beta_names: tuple = ()
    schwarz: bool = False

    def eval(self, z, beta):
        return _ret(z, self._f(_as_z(z), self._beta(beta)))

    def eval_zprime(self, z, beta):
        return _ret(z, self._fz(_as_z(z), self._beta(beta)))

    def eval_dbeta(self, z, beta, k):
        return _ret(z, self._fb(_as_z(z), self._beta(beta), self.k_index(k)))

    def z0(self, beta1: float):
        return None

    def z0_prime(self, beta1: float):
        return None

    def c(self, beta):
        return 0.0

    def jump_on_extra_cut(self, z, beta):
        return _ret(z, np.zeros(np.shape(z), dtype=complex))

    def excluded_points(self, beta) -> list:
        """Points the loops must keep away from (singularities other than z0)."""
        return []

    def cuts(self, beta) -> list:
        return []

    def k_index(self, k) -> int:
        if isinstance(k, str):
            if k not in self.beta_names:
                raise KeyError(f"unknown parameter {k!r}; have {self.beta_names}")
            return self.beta_names.index(k)
        k = int(k)
        if not 1 <= k <= len(self.beta_names):
            raise KeyError(f"parameter index {k} out of range 1..{len(self.beta_names)}")
        return k - 1

    def _beta(self, beta) -> np.ndarray:
        if isinstance(beta, Mapping):
            beta = [beta[n] for n in self.beta_names]
        b = np.asarray(beta, dtype=float).ravel()
        if b.size != len(self.beta_names):
            raise FunctionDomainError(f"expected {len(self.beta_names)} parameters {self.beta_names}")
        return b

    def _f(self, z, b):
        raise NotImplementedError

    def _fz(self, z, b):
        raise NotImplementedError

    def _fb(self, z, b, i):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# NLS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NLSParameters:
    mu: float
    x: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise FunctionDomainError("mu must be positive")

    @property
    def beta(self) -> tuple:
        return (self.mu, self.x, self.t)

    @property
    def z0(self) -> float:
        return self.mu / 2


def nls_T(mu: float) -> complex:
    """T = sqrt(mu^2/4 - 1) with Im T >= 0."""
    if not mu > 0:
        raise FunctionDomainError("mu must be positive")
    q = mu * mu / 4 - 1
    return complex(math.sqrt(q)) if q >= 0 else 1j * math.sqrt(-q)


def _log_minus(w: np.ndarray) -> np.ndarray:
    # log(mu/2 - z) for Im z >= 0: cut along [mu/2, inf) approached from above
    return np.log(w.real - 1j * np.abs(w.imag))


def _log_shift(z: np.ndarray, p: complex) -> np.ndarray:
    """log(z - p) on the closed upper half-plane with the NLS cut layout."""
    u = z - p
    if p.imag > 0:
        # cut from p straight down to 0 (and then along the real axis)
        arg = np.angle(u)
        arg = np.where(arg < -math.pi / 2, arg + 2 * math.pi, arg)
        return np.log(np.abs(u)) + 1j * arg
    return np.log(u.real + 1j * np.where(u.imag == 0, 0.0, u.imag))


def _asinh_coeffs(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.array([(-1) ** j * math.factorial(2 * j) / (4**j * math.factorial(j) ** 2 * (2 * j + 1)) for j in k])


_ASINH = _asinh_coeffs(_SERIES_TERMS + 1)


def _use_series(z: np.ndarray, T: complex, method: str = "auto") -> np.ndarray:
    if method not in ("auto", "series", "direct"):
        raise ValueError("method must be 'auto', 'series' or 'direct'")
    if method != "auto":
        return np.full(z.shape, method == "series")
    if abs(T) > T_SWITCH:
        return np.zeros(z.shape, dtype=bool)
    with np.errstate(divide="ignore"):
        return np.abs(T) <= _SERIES_RATIO * np.abs(z)


def _principal_log_upper(z: np.ndarray) -> np.ndarray:
    return np.log(z.real + 1j * np.where(z.imag == 0, 0.0, z.imag))


def _t_part(z, T, method: str = "auto"):
    """(z+T)/2 log(z+T) + (z-T)/2 log(z-T) - T asinh(T)."""
    ser = _use_series(z, T, method)
    out = np.empty(z.shape, dtype=complex)
    d = ~ser
    if np.any(d):
        zd = z[d]
        out[d] = (
            0.5 * (zd + T) * _log_shift(zd, -T)
            + 0.5 * (zd - T) * _log_shift(zd, T)
            - T * np.arcsinh(T)
        )
    if np.any(ser):
        zs = z[ser]
        T2 = T * T
        acc = zs * _principal_log_upper(zs)
        for k in range(1, _SERIES_TERMS + 1):
            acc = acc + T2**k / (2 * k * (2 * k - 1) * zs ** (2 * k - 1))
        acc = acc - sum(_ASINH[k] * T2 ** (k + 1) for k in range(_SERIES_TERMS))
        out[ser] = acc
    return out


def _t_part_z(z, T):
    """d/dz of the T part: (log(z+T) + log(z-T))/2 + 1."""
    ser = _use_series(z, T)
    out = np.empty(z.shape, dtype=complex)
    d = ~ser
    if np.any(d):
        zd = z[d]
        out[d] = 0.5 * (_log_shift(zd, -T) + _log_shift(zd, T)) + 1.0
    if np.any(ser):
        zs = z[ser]
        T2 = T * T
        acc = _principal_log_upper(zs) + 1.0
        for k in range(1, _SERIES_TERMS + 1):
            acc = acc - T2**k / (2 * k * zs ** (2 * k))
        out[ser] = acc
    return out


def _t_part_mu(z, T, mu):
    """mu/(8T) [log(z+T) - log(z-T) - 2 asinh T].

    The -1/2 from differentiating T asinh T cancels the +1/2 from the w log w
    term, so neither appears here.
    """
    ser = _use_series(z, T)
    out = np.empty(z.shape, dtype=complex)
    d = ~ser
    if np.any(d):
        if T == 0:
            raise SingularPointError("series branch required at T = 0")
        zd = z[d]
        out[d] = mu / (8 * T) * (_log_shift(zd, -T) - _log_shift(zd, T) - 2 * np.arcsinh(T))
    if np.any(ser):
        zs = z[ser]
        T2 = T * T
        acc = np.zeros(zs.shape, dtype=complex)
        for k in range(_SERIES_TERMS):
            acc = acc + T2**k * (zs ** (-(2 * k + 1)) / (2 * k + 1) - _ASINH[k])
        out[ser] = mu / 4 * acc
    return out


class NLSJumpFunction(JumpFunction):
    """Semiclassical NLS jump function; beta = (mu, x, t), z0 = mu/2."""

    name = "nls"
    beta_names = ("mu", "x", "t")
    schwarz = True

    def __init__(self, guard: float = 1e-14):
        self.guard = guard

    def z0(self, beta1):
        return 0.5 * float(beta1)

    def z0_prime(self, beta1):
        return 0.5

    def c(self, beta):
        return -1.0

    def jump_on_extra_cut(self, z, beta):
        b = self._beta(beta)
        x = np.real(_as_z(z))
        return _ret(z, 1j * math.pi * np.abs(x - b[0] / 2) + 0j)

    def excluded_points(self, beta) -> list:
        mu = self._beta(beta)[0]
        T = nls_T(mu)
        pts = [T, -T]
        if T.imag > 0:
            pts += list(np.linspace(0, 1, 17) * T)
            pts += [np.conj(p) for p in pts]
        return [complex(p) for p in dict.fromkeys(pts)]

    def cuts(self, beta) -> list:
        mu = self._beta(beta)[0]
        T = nls_T(mu)
        out = [("real", mu / 2, math.inf)]
        if T.imag > 0:
            out += [("segment", 0.0, T), ("segment", 0.0, np.conj(T))]
        return out

    def _check(self, z, mu, T):
        scale = max(1.0, mu)
        bad = np.abs(z - mu / 2) <= self.guard * scale
        bad |= np.abs(z - T) <= self.guard * scale
        bad |= np.abs(z + T) <= self.guard * scale
        if T.imag > 0:
            on_seg = (np.abs(z.real) <= self.guard * scale) & (np.abs(z.imag) <= T.imag)
            bad |= on_seg & ~(np.abs(z.imag) == 0)
        if np.any(bad):
            raise SingularPointError(f"z on a singular point or cut of the NLS f: {z[bad][0]}")

    def _split(self, z, mu, evaluator):
        """Evaluate an upper-half formula and extend by Schwarz reflection."""
        T = nls_T(mu)
        self._check(z, mu, T)
        lower = z.imag < 0
        zu = np.where(lower, np.conj(z), z)
        val = evaluator(zu, T)
        return np.where(lower, np.conj(val), val)

    def _f(self, z, b, T_override=None, method="auto"):
        mu, x, t = b

        def up(zu, T):
            if T_override is not None:
                T = T_override
            w = mu / 2 - zu
            return (
                w * (0.5j * math.pi + _log_minus(w))
                + _t_part(zu, T, method)
                - x * zu
                - 2 * t * zu * zu
                + mu / 2 * math.log(2.0)
            )

        return self._split(z, mu, up)

    def _fz(self, z, b):
        mu, x, t = b

        def up(zu, T):
            w = mu / 2 - zu
            return -0.5j * math.pi - _log_minus(w) - 1.0 + _t_part_z(zu, T) - x - 4 * t * zu

        return self._split(z, mu, up)

    def _fb(self, z, b, i):
        mu = b[0]
        if i == 1:
            return -z
        if i == 2:
            return -2 * z * z

        def up(zu, T):
            w = mu / 2 - zu
            return 0.25j * math.pi + 0.5 * _log_minus(w) + 0.5 * math.log(2.0) + _t_part_mu(zu, T, mu)

        return self._split(z, mu, up)

    def eval_with_T(self, z, beta, T: complex, method: str = "auto"):
        """f with an explicitly supplied T and T-part evaluation method.

        ``method`` is "auto" (series for small T), "series" or "direct".
        """
        return _ret(z, self._f(_as_z(z), self._beta(beta), T_override=complex(T), method=method))


def nls_jump_function() -> NLSJumpFunction:
    return NLSJumpFunction()


_NLS = NLSJumpFunction()


def nls_f(z, p: NLSParameters):
    return _NLS.eval(z, p.beta)


def nls_f_prime(z, p: NLSParameters):
    return _NLS.eval_zprime(z, p.beta)


def nls_f_mu(z, p: NLSParameters):
    zz = _as_z(z)
    if np.any(zz == 0):
        raise SingularPointError("f_mu is singular at z = 0")
    return _NLS.eval_dbeta(z, p.beta, "mu")


# ---------------------------------------------------------------------------
# polynomial fixtures
# ---------------------------------------------------------------------------


class PolynomialJumpFunction(JumpFunction):
    """f(z) = sum_k c_k(beta) z^k with c_k affine in beta.

    ``A[k, 0]`` is the constant part of c_k and ``A[k, j + 1]`` its slope in
    beta_j.
    """

    name = "polynomial"

    def __init__(self, A: np.ndarray, beta_names: Sequence[str]):
        self.A = np.asarray(A, dtype=complex)
        self.beta_names = tuple(beta_names)
        if self.A.ndim != 2 or self.A.shape[1] != len(self.beta_names) + 1:
            raise ValueError("coefficient table has the wrong shape")
        self.schwarz = bool(np.all(self.A.imag == 0))

    def coefficients(self, beta) -> np.ndarray:
        b = self._beta(beta)
        return self.A[:, 0] + self.A[:, 1:] @ b

    def _f(self, z, b):
        return np.polynomial.polynomial.polyval(z, self.A[:, 0] + self.A[:, 1:] @ b)

    def _fz(self, z, b):
        c = np.polynomial.polynomial.polyder(self.A[:, 0] + self.A[:, 1:] @ b)
        return np.polynomial.polynomial.polyval(z, c) + 0 * z

    def _fb(self, z, b, i):
        return np.polynomial.polynomial.polyval(z, self.A[:, i + 1]) + 0 * z


def synthetic_polynomial_f(coeffs: Sequence, beta_names: Sequence[str] = ("x", "t")) -> PolynomialJumpFunction:
    """Polynomial f from coefficients given as numbers or {name: slope, "const": c} maps.

    ``[0, {"x": -1}, {"t": -2}]`` is -x z - 2 t z^2.
    """
    names = tuple(beta_names)
    A = np.zeros((len(coeffs), len(names) + 1), dtype=complex)
    for k, c in enumerate(coeffs):
        if isinstance(c, Mapping):
            for key, v in c.items():
                if key == "const":
                    A[k, 0] = v
                elif key in names:
                    A[k, names.index(key) + 1] = v
                else:
                    raise KeyError(f"unknown parameter {key!r}")
        else:
            A[k, 0] = c
    return PolynomialJumpFunction(A, names)


# ---------------------------------------------------------------------------
# log toy
# ---------------------------------------------------------------------------


def _fd(fn: Callable[[float], complex], mu: float) -> complex:
    h = 1e-5 * max(1.0, abs(mu))
    return (fn(mu + h) - fn(mu - h)) / (2 * h)


def _const_or_fn(v) -> Callable[[float], complex]:
    return v if callable(v) else (lambda mu, v=v: v)


class ToyLogJumpFunction(JumpFunction):
    """f(z, mu) = c(mu) (z - z0(mu)) log(z - z0(mu)), principal log."""

    name = "toy"
    beta_names = ("mu",)

    def __init__(self, c_fn, z0_fn, c_prime_fn=None, z0_prime_fn=None):
        self.c_fn = _const_or_fn(c_fn)
        self.z0_fn = _const_or_fn(z0_fn)
        self.c_prime_fn = c_prime_fn if c_prime_fn is not None else (
            (lambda mu: 0.0) if not callable(c_fn) else (lambda mu: _fd(self.c_fn, mu)))
        self.z0_prime_fn = z0_prime_fn if z0_prime_fn is not None else (
            (lambda mu: 0.0) if not callable(z0_fn) else (lambda mu: _fd(self.z0_fn, mu)))

    def z0(self, beta1):
        return complex(self.z0_fn(float(beta1)))

    def z0_prime(self, beta1):
        return complex(self.z0_prime_fn(float(beta1)))

    def c(self, beta):
        return complex(self.c_fn(float(self._beta(beta)[0])))

    def _u(self, z, mu):
        u = z - self.z0_fn(mu)
        if np.any(u == 0):
            return u, np.where(u == 0, 0.0, np.log(np.where(u == 0, 1.0, u)))
        return u, np.log(u)

    def _f(self, z, b):
        mu = b[0]
        u, lg = self._u(z, mu)
        return self.c_fn(mu) * u * lg

    def _fz(self, z, b):
        mu = b[0]
        u, lg = self._u(z, mu)
        if np.any(u == 0):
            raise SingularPointError("f' is singular at z0")
        return self.c_fn(mu) * (lg + 1.0)

    def _fb(self, z, b, i):
        mu = b[0]
        u, lg = self._u(z, mu)
        if np.any(u == 0):
            raise SingularPointError("f_mu is singular at z0")
        return self.c_prime_fn(mu) * u * lg - self.c_fn(mu) * self.z0_prime_fn(mu) * (lg + 1.0)


def appendix_toy_f(c_fn, z0_fn, c_prime_fn=None, z0_prime_fn=None) -> ToyLogJumpFunction:
    return ToyLogJumpFunction(c_fn, z0_fn, c_prime_fn, z0_prime_fn)


def _toy_antiderivative(u):
    u = complex(u)
    if u == 0:
        return 0.0
    return u * u / 2 * (np.log(u) - 0.5)


def toy_integral(toy: ToyLogJumpFunction, mu: float, z1: complex, z2: complex) -> complex:
    """Closed form of the integral of the toy f from z1 to z2 (path off the log cut)."""
    z0 = toy.z0_fn(mu)
    return complex(toy.c_fn(mu) * (_toy_antiderivative(z2 - z0) - _toy_antiderivative(z1 - z0)))


def toy_integral_dmu(toy: ToyLogJumpFunction, mu: float, z1: complex, z2: complex) -> complex:
    """Closed-form mu-derivative of :func:`toy_integral` with fixed endpoints."""
    z0 = toy.z0_fn(mu)
    u1, u2 = complex(z1 - z0), complex(z2 - z0)

    def ulogu(u):
        return 0.0 if u == 0 else u * np.log(u)

    J = _toy_antiderivative(u2) - _toy_antiderivative(u1)
    return complex(toy.c_prime_fn(mu) * J - toy.c_fn(mu) * toy.z0_prime_fn(mu) * (ulogu(u2) - ulogu(u1)))


# ---------------------------------------------------------------------------
# translation wrapper
# ---------------------------------------------------------------------------


class TranslatedJumpFunction(JumpFunction):
    """g(z, beta, s) = f(z - s, beta); the shift s is appended as the last parameter."""

    def __init__(self, base: JumpFunction, shift_name: str = "s"):
        self.base = base
        self.name = f"{base.name}-shifted"
        self.beta_names = tuple(base.beta_names) + (shift_name,)
        self.schwarz = False

    def _f(self, z, b):
        return self.base._f(z - b[-1], b[:-1])

    def _fz(self, z, b):
        return self.base._fz(z - b[-1], b[:-1])

    def _fb(self, z, b, i):
        if i == len(self.beta_names) - 1:
            return -self.base._fz(z - b[-1], b[:-1])
        return self.base._fb(z - b[-1], b[:-1], i)

    def z0(self, beta1):
        return self.base.z0(beta1)

    def excluded_points(self, beta) -> list:
        b = self._beta(beta)
        return [p + b[-1] for p in self.base.excluded_points(b[:-1])]


class AugmentedJumpFunction(JumpFunction):
    """f(z, beta) + sum_k a_k z^k with fixed coefficients a_k.

    Real coefficients keep Schwarz symmetry.  Used to build synthetic
    higher-genus fixtures: K is linear in f, so a_k can be chosen to make a
    given branchpoint set solve the modulation equations.
    """

    def __init__(self, base: JumpFunction, coeffs: Sequence[complex]):
        self.base = base
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.name = f"{base.name}+poly"
        self.beta_names = tuple(base.beta_names)
        self.schwarz = bool(base.schwarz and np.all(self.coeffs.imag == 0))

    def _f(self, z, b):
        return self.base._f(z, b) + np.polynomial.polynomial.polyval(z, self.coeffs)

    def _fz(self, z, b):
        d = np.polynomial.polynomial.polyder(self.coeffs) if self.coeffs.size > 1 else np.zeros(1)
        return self.base._fz(z, b) + np.polynomial.polynomial.polyval(z, d)

    def _fb(self, z, b, i):
        return self.base._fb(z, b, i)

    def z0(self, beta1):
        return self.base.z0(beta1)

    def z0_prime(self, beta1):
        return self.base.z0_prime(beta1)

    def c(self, beta):
        return self.base.c(beta)

    def jump_on_extra_cut(self, z, beta):
        return self.base.jump_on_extra_cut(z, beta)

    def excluded_points(self, beta) -> list:
        return self.base.excluded_points(beta)

    def cuts(self, beta) -> list:
        return self.base.cuts(beta)
