"""Closed-form vector-valued time signals.

A :class:`Signal` is a finite sum of elementary terms (constants, monomials,
sinusoids, exponentials), each carrying a per-component coefficient vector.
The family is closed under differentiation, addition, and linear maps, which
is what makes exact high-order forcing derivatives available to the
differential-algebraic solution formulas downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["Signal", "Term", "const", "monomial", "sinusoid", "exponential"]

# relative tolerance used when testing whether a frequency is an integer
# multiple of a base frequency
FREQ_RTOL = 1e-9


@dataclass(frozen=True)
class Term:
    """One additive term: ``coeff * basis(t)``.

    kind:
        "const"  basis = 1
        "poly"   basis = t**power          (power >= 1)
        "sin"    basis = sin(omega*t + phase)
        "exp"    basis = exp(rate*t)
    """

    kind: str
    coeff: np.ndarray
    power: int = 0
    omega: float = 0.0
    phase: float = 0.0
    rate: float = 0.0

    def basis(self, t):
        if self.kind == "const":
            return np.ones_like(np.asarray(t, dtype=float))
        if self.kind == "poly":
            return np.asarray(t, dtype=float) ** self.power
        if self.kind == "sin":
            return np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)
        if self.kind == "exp":
            return np.exp(self.rate * np.asarray(t, dtype=float))
        raise AssertionError(f"unknown term kind {self.kind!r}")

    def derivative(self) -> list["Term"]:
        c = self.coeff
        if self.kind == "const":
            return []
        if self.kind == "poly":
            if self.power == 1:
                return [Term("const", c * 1.0)]
            return [Term("poly", c * self.power, power=self.power - 1)]
        if self.kind == "sin":
            # d/dt sin(wt+p) = w sin(wt + p + pi/2); stays inside the family
            return [Term("sin", c * self.omega, omega=self.omega,
                         phase=self.phase + 0.5 * math.pi)]
        if self.kind == "exp":
            return [Term("exp", c * self.rate, rate=self.rate)]
        raise AssertionError(f"unknown term kind {self.kind!r}")


def _as_coeff(value, dim) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim if dim is not None else 1, float(arr))
    if arr.ndim != 1:
        raise ValidationError("signal coefficients must be scalars or 1-d vectors")
    if dim is not None and arr.shape[0] != dim:
        raise ValidationError(
            f"coefficient has dimension {arr.shape[0]}, expected {dim}")
    return arr.copy()


class Signal:
    """Immutable closed-form signal ``t -> R^dim``."""

    def __init__(self, dim: int, terms=()):
        self._dim = int(dim)
        if self._dim < 0:
            raise ValidationError("signal dimension must be >= 0")
        clean = []
        for term in terms:
            if term.coeff.shape != (self._dim,):
                raise ValidationError("term coefficient dimension mismatch")
            if np.any(term.coeff != 0.0):
                clean.append(term)
        self._terms = tuple(clean)

    # -- introspection -------------------------------------------------

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def terms(self):
        return self._terms

    def __repr__(self):
        return f"Signal(dim={self._dim}, terms={len(self._terms)})"

    # -- evaluation ----------------------------------------------------

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """Value at time(s) ``t``; shape (dim,) for scalar t, (len(t), dim) else."""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape + (self._dim,))
        for term in self._terms:
            out += np.multiply.outer(term.basis(t_arr), term.coeff)
        return out

    # -- calculus ------------------------------------------------------

    def derivative(self, order: int = 1) -> "Signal":
        """Exact derivative of the given order (order >= 0)."""
        if order < 0:
            raise ValidationError("derivative order must be >= 0")
        terms = list(self._terms)
        for _ in range(order):
            nxt = []
            for term in terms:
                nxt.extend(term.derivative())
            terms = nxt
        return Signal(self._dim, terms)

    def is_bounded(self) -> bool:
        """True iff the signal is bounded on [0, inf)."""
        for term in self._terms:
            if term.kind == "poly" and term.power >= 1:
                return False
            if term.kind == "exp" and term.rate > 0:
                return False
        return True

    # -- algebra -------------------------------------------------------

    def __add__(self, other: "Signal") -> "Signal":
        if not isinstance(other, Signal):
            return NotImplemented
        if other.dim != self._dim:
            raise ValidationError("cannot add signals of different dimension")
        return Signal(self._dim, self._terms + other._terms)

    def __mul__(self, scalar) -> "Signal":
        s = float(scalar)
        return Signal(self._dim, [Term(t.kind, t.coeff * s, t.power, t.omega,
                                       t.phase, t.rate) for t in self._terms])

    __rmul__ = __mul__

    def __neg__(self) -> "Signal":
        return self * -1.0

    def __sub__(self, other: "Signal") -> "Signal":
        return self + (-other)

    def matmul(self, matrix) -> "Signal":
        """Componentwise linear map: returns the signal ``t -> matrix @ self(t)``."""
        mat = np.atleast_2d(np.asarray(matrix, dtype=float))
        if mat.shape[1] != self._dim:
            raise ValidationError(
                f"matrix has {mat.shape[1]} columns, signal dimension is {self._dim}")
        return Signal(mat.shape[0], [Term(t.kind, mat @ t.coeff, t.power,
                                          t.omega, t.phase, t.rate)
                                     for t in self._terms])

    def __rmatmul__(self, matrix) -> "Signal":
        return self.matmul(matrix)

    def select(self, indices) -> "Signal":
        """Signal made of a subset/reordering of components."""
        idx = np.asarray(indices, dtype=int)
        return Signal(idx.size, [Term(t.kind, t.coeff[idx], t.power, t.omega,
                                      t.phase, t.rate) for t in self._terms])

    @staticmethod
    def concat(signals) -> "Signal":
        """Stack signals into one of dimension ``sum(dims)``."""
        signals = list(signals)
        dims = [s.dim for s in signals]
        total = sum(dims)
        terms = []
        offset = 0
        for s, d in zip(signals, dims):
            for t in s.terms:
                coeff = np.zeros(total)
                coeff[offset:offset + d] = t.coeff
                terms.append(Term(t.kind, coeff, t.power, t.omega, t.phase, t.rate))
            offset += d
        return Signal(total, terms)

    @staticmethod
    def zero(dim: int) -> "Signal":
        return Signal(dim, [])

    # -- harmonic analysis ----------------------------------------------

    def frequencies(self):
        """Sorted distinct sinusoid frequencies (rad/s) present in the signal."""
        return sorted({t.omega for t in self._terms if t.kind == "sin"})

    def base_frequency(self):
        """Largest omega0 such that every sinusoid frequency is an integer
        multiple of it, or None if the signal has no sinusoid terms."""
        freqs = self.frequencies()
        if not freqs:
            return None
        base = freqs[0]
        for om in freqs[1:]:
            # real-valued gcd via rational rounding
            ratio = om / base
            k = round(ratio)
            if k >= 1 and abs(ratio - k) <= FREQ_RTOL * ratio:
                continue
            # fall back to gcd on a fine rational grid
            base = _float_gcd(base, om)
        for om in freqs:
            ratio = om / base
            if abs(ratio - round(ratio)) > FREQ_RTOL * max(1.0, ratio):
                raise ValidationError(
                    f"frequencies {freqs} have no common base (offender {om})")
        return base

    def fourier_components(self, base_omega: float) -> dict[int, np.ndarray]:
        """Exact decomposition into complex exponentials ``sum_k c_k e^{i k w0 t}``.

        Requires the signal to be a trigonometric polynomial plus constant with
        all frequencies integer multiples of ``base_omega``. Raises
        ValidationError listing the offending terms otherwise.
        """
        if base_omega <= 0:
            raise ValidationError("base frequency must be positive")
        comps: dict[int, np.ndarray] = {}

        def add(k, vec):
            if k in comps:
                comps[k] = comps[k] + vec
            else:
                comps[k] = np.asarray(vec, dtype=complex)

        offenders = []
        for term in self._terms:
            if term.kind == "const":
                add(0, term.coeff.astype(complex))
            elif term.kind == "sin":
                if term.omega == 0.0:
                    add(0, term.coeff * math.sin(term.phase))
                    continue
                ratio = term.omega / base_omega
                k = round(ratio)
                if k < 1 or abs(ratio - k) > FREQ_RTOL * max(1.0, abs(ratio)):
                    offenders.append(term)
                    continue
                # a sin(k w0 t + p) = -(i/2) a e^{ip} e^{ik w0 t} + conj.
                amp = term.coeff * np.exp(1j * term.phase) / 2j
                add(k, amp)
                add(-k, np.conj(amp))
            elif term.kind == "exp" and term.rate == 0.0:
                add(0, term.coeff.astype(complex))
            else:
                offenders.append(term)
        if offenders:
            desc = ", ".join(f"{t.kind}(omega={t.omega}, power={t.power}, "
                             f"rate={t.rate})" for t in offenders)
            raise ValidationError(
                f"signal is not a trigonometric polynomial over base {base_omega}:"
                f" offending terms: {desc}")
        return comps

    @staticmethod
    def from_fourier_components(dim: int, base_omega: float,
                                comps: dict[int, np.ndarray]) -> "Signal":
        """Rebuild a real signal from a conjugate-symmetric component dict."""
        terms = []
        for k, amp in sorted(comps.items()):
            amp = np.asarray(amp, dtype=complex)
            if k == 0:
                terms.append(Term("const", amp.real.copy()))
            elif k > 0:
                # c e^{ikw t} + conj(c) e^{-ikw t} = 2Re(c)cos + (-2Im(c))sin
                terms.append(Term("sin", -2.0 * amp.imag, omega=k * base_omega))
                terms.append(Term("sin", 2.0 * amp.real, omega=k * base_omega,
                                  phase=0.5 * math.pi))
        return Signal(dim, terms)

    # -- (de)serialization ----------------------------------------------

    def to_json_terms(self):
        """Serialize to the scenario-file term-list format."""
        out = []
        for t in self._terms:
            if t.kind == "const":
                out.append({"type": "const", "value": t.coeff.tolist()})
            elif t.kind == "sin":
                out.append({"type": "sin", "amplitude": t.coeff.tolist(),
                            "period_s": 2 * math.pi / t.omega if t.omega else 0.0,
                            "phase_rad": t.phase})
            elif t.kind == "poly":
                coeffs = [np.zeros(self._dim).tolist() for _ in range(t.power + 1)]
                coeffs[t.power] = t.coeff.tolist()
                out.append({"type": "poly", "coeffs": coeffs})
            elif t.kind == "exp":
                out.append({"type": "exp", "amplitude": t.coeff.tolist(),
                            "rate_per_s": t.rate})
        return out


def _float_gcd(a: float, b: float) -> float:
    """Euclidean gcd for positive floats, tolerant to roundoff."""
    x, y = max(a, b), min(a, b)
    for _ in range(64):
        if y < FREQ_RTOL * x:
            return x
        x, y = y, math.fmod(x, y)
        if y > x:  # fmod noise
            x, y = y, x
    return x


# -- convenience constructors ------------------------------------------


def const(value, dim=None) -> Signal:
    c = _as_coeff(value, dim)
    return Signal(c.shape[0], [Term("const", c)])


def monomial(coeff, power: int, dim=None) -> Signal:
    if power < 0:
        raise ValidationError("monomial power must be >= 0")
    c = _as_coeff(coeff, dim)
    if power == 0:
        return Signal(c.shape[0], [Term("const", c)])
    return Signal(c.shape[0], [Term("poly", c, power=power)])


def sinusoid(amplitude, omega: float, phase: float = 0.0, dim=None) -> Signal:
    c = _as_coeff(amplitude, dim)
    return Signal(c.shape[0], [Term("sin", c, omega=float(omega),
                                    phase=float(phase))])


def exponential(amplitude, rate: float, dim=None) -> Signal:
    c = _as_coeff(amplitude, dim)
    return Signal(c.shape[0], [Term("exp", c, rate=float(rate))])


def from_json_terms(spec, dim: int) -> Signal:
    """Parse the scenario-file term-list format into a Signal.

    Accepted term objects::

        {"type": "const", "value": v}
        {"type": "sin", "amplitude": a, "period_s": P, "phase_rad": phi}
        {"type": "poly", "coeffs": [c0, c1, ...]}
        {"type": "exp", "amplitude": a, "rate_per_s": g}

    where ``v``, ``a`` and each ``ci`` may be scalars (broadcast over all
    components) or length-``dim`` lists.
    """
    if not isinstance(spec, (list, tuple)):
        raise ValidationError("signal spec must be a list of term objects")
    sig = Signal.zero(dim)
    for i, term in enumerate(spec):
        kind = term.get("type")
        if kind == "const":
            sig = sig + const(term["value"], dim)
        elif kind == "sin":
            period = float(term["period_s"])
            if period <= 0:
                raise ValidationError(f"term {i}: period_s must be > 0")
            sig = sig + sinusoid(term["amplitude"], 2 * math.pi / period,
                                 float(term.get("phase_rad", 0.0)), dim)
        elif kind == "poly":
            for power, c in enumerate(term["coeffs"]):
                sig = sig + monomial(c, power, dim)
        elif kind == "exp":
            sig = sig + exponential(term["amplitude"],
                                    float(term["rate_per_s"]), dim)
        else:
            raise ValidationError(f"term {i}: unknown signal term type {kind!r}")
    return sig
