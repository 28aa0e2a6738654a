"""Honest-channel model for the symmetric twin-field setup.

Charlie sits at the midpoint of the Alice-Bob fiber.  Each arm has
transmittance ``eta`` (fiber loss times detector efficiency).  Two threshold
detectors watch the outputs of a balanced beam splitter; misalignment leaks a
fraction ``misalignment`` of the interfering intensity into the wrong port.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

from .errors import DataIntegrityError, DomainError


@dataclass(frozen=True)
class ChannelParams:
    dark_count: float = 8e-8
    det_eff: float = 0.145
    loss_coeff: float = 0.2
    misalignment: float = 0.0
    ec_eff: float = 1.15

    def __post_init__(self):
        if not 0.0 <= self.dark_count < 0.5:
            raise DomainError(f"dark_count must lie in [0, 0.5), got {self.dark_count}", module="channel")
        if not 0.0 < self.det_eff <= 1.0:
            raise DomainError(f"det_eff must lie in (0, 1], got {self.det_eff}", module="channel")
        if not self.loss_coeff >= 0.0:
            raise DomainError(f"loss_coeff must be >= 0, got {self.loss_coeff}", module="channel")
        if not 0.0 <= self.misalignment <= 0.5:
            raise DomainError(f"misalignment must lie in [0, 0.5], got {self.misalignment}", module="channel")
        if not self.ec_eff >= 1.0:
            raise DomainError(f"ec_eff must be >= 1, got {self.ec_eff}", module="channel")


def _check_distance(distance_km):
    if not distance_km >= 0.0:
        raise DomainError(f"distance must be >= 0, got {distance_km}", module="channel")


def _check_intensity(*omegas):
    for w in omegas:
        if not w >= 0.0:
            raise DomainError(f"intensity must be >= 0, got {w}", module="channel")


def arm_transmittance(params, distance_km):
    """Per-arm transmittance, detector efficiency included (Charlie at the midpoint)."""
    _check_distance(distance_km)
    return params.det_eff * 10.0 ** (-params.loss_coeff * (distance_km / 2.0) / 10.0)


def _click(log_no_dark, mean):
    """P(click) = 1 - (1 - p_dc) e^{-mean}, accurate for tiny values."""
    return -math.expm1(log_no_dark - mean)


def code_gain_and_error(params, mu, distance_km):
    """Code-mode gain Q_c and bit error rate E_c for phase-matched |sqrt(mu)>|±sqrt(mu)>."""
    _check_intensity(mu)
    eta = arm_transmittance(params, distance_km)
    ln1 = math.log1p(-params.dark_count)
    arriving = 2.0 * mu * eta
    q = -math.expm1(2.0 * ln1 - arriving)
    if q == 0.0:
        return 0.0, 0.0
    p_sig = _click(ln1, arriving * (1.0 - params.misalignment))
    p_wrong = _click(ln1, arriving * params.misalignment)
    # double clicks get a random bit: half of them are errors
    err = p_wrong * (1.0 - p_sig) + 0.5 * p_sig * p_wrong
    return q, min(0.5, err / q)


def decoy1_gain(params, omega1, omega2, distance_km):
    """Gain of phase-randomized pulses; depends only on the total arriving intensity."""
    _check_intensity(omega1, omega2)
    eta = arm_transmittance(params, distance_km)
    return -math.expm1(2.0 * math.log1p(-params.dark_count) - eta * (omega1 + omega2))


def decoy2_gain(params, omega1, omega2, distance_km):
    """Gain of phase-locked pulses |sqrt(w1)>|sqrt(w2)> (relative phase 0).

    The ports receive eta (sqrt(w1) ± sqrt(w2))^2 / 2; misalignment moves
    intensity between ports but conserves the total.
    """
    _check_intensity(omega1, omega2)
    eta = arm_transmittance(params, distance_km)
    # the two ports sum to eta (w1 + w2) whatever the misalignment, so
    # no-click probability (1-p_dc)^2 e^{-eta (w1 + w2)}
    total = eta * (omega1 + omega2)
    return -math.expm1(2.0 * math.log1p(-params.dark_count) - total)


def fock_yield(params, n, m, distance_km):
    """Click probability for Fock states |n>|m>: every photon is lost independently."""
    if n < 0 or m < 0:
        raise DomainError("photon numbers must be >= 0", module="channel")
    eta = arm_transmittance(params, distance_km)
    log_loss = (n + m) * math.log1p(-eta) if eta < 1.0 else (0.0 if n + m == 0 else -math.inf)
    return -math.expm1(2.0 * math.log1p(-params.dark_count) + log_loss)


@dataclass(frozen=True)
class GainTable:
    """Observed (or modeled) gains for code mode and both decoy modes."""

    mu: float
    code_gain: float
    code_error: float
    d1_gains: dict = field(default_factory=dict)
    d2_gains: dict = field(default_factory=dict)
    provenance: str = "modeled"

    def __post_init__(self):
        values = [self.code_gain, self.code_error, *self.d1_gains.values(), *self.d2_gains.values()]
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise DataIntegrityError(f"gain/error value {v!r} outside [0, 1]", module="channel")
        if self.provenance not in ("modeled", "measured"):
            raise DomainError(f"unknown provenance {self.provenance!r}", module="channel")

    def d1(self, omega1, omega2):
        try:
            return self.d1_gains[(omega1, omega2)]
        except KeyError:
            raise DataIntegrityError(f"missing decoy-mode-1 gain for ({omega1}, {omega2})",
                                     module="channel", pair=(omega1, omega2)) from None

    def d2(self, omega1, omega2):
        try:
            return self.d2_gains[(omega1, omega2)]
        except KeyError:
            raise DataIntegrityError(f"missing decoy-mode-2 gain for ({omega1}, {omega2})",
                                     module="channel", pair=(omega1, omega2)) from None

    def covers(self, i1, i2):
        d1_ok = all(k in self.d1_gains for k in itertools.product(i1, i1))
        d2_ok = all(k in self.d2_gains for k in itertools.product(i2, i2))
        return d1_ok and d2_ok

    # CSV: header mode,omega1,omega2,gain

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "omega1", "omega2", "gain"])
        w.writerow(["code", _fmt(self.mu), _fmt(self.mu), _fmt(self.code_gain)])
        w.writerow(["code_err", _fmt(self.mu), _fmt(self.mu), _fmt(self.code_error)])
        for mode, table in (("d1", self.d1_gains), ("d2", self.d2_gains)):
            for (w1, w2), g in sorted(table.items()):
                w.writerow([mode, _fmt(w1), _fmt(w2), _fmt(g)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["mode", "omega1", "omega2", "gain"]:
            raise DataIntegrityError("gain table must start with header mode,omega1,omega2,gain",
                                     module="channel")
        mu = code = err = None
        d1, d2 = {}, {}
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 4:
                raise DataIntegrityError(f"line {lineno}: expected 4 fields", module="channel")
            mode = row[0].strip()
            try:
                w1, w2, g = (float(v) for v in row[1:])
            except ValueError:
                raise DataIntegrityError(f"line {lineno}: non-numeric field", module="channel") from None
            if mode == "code":
                mu, code = w1, g
            elif mode == "code_err":
                err = g
            elif mode == "d1":
                d1[(w1, w2)] = g
            elif mode == "d2":
                d2[(w1, w2)] = g
            else:
                raise DataIntegrityError(f"line {lineno}: unknown mode {mode!r}", module="channel")
        if code is None or err is None:
            raise DataIntegrityError("gain table lacks code/code_err rows", module="channel")
        return cls(mu, code, err, d1, d2, provenance="measured")


def _fmt(v):
    return format(float(v), ".17g")


def build_gain_table(params, intensities, distance_km):
    """Honest-model gains for every intensity pair the protocol uses."""
    q, e = code_gain_and_error(params, intensities.mu, distance_km)
    d1 = {(a, b): decoy1_gain(params, a, b, distance_km)
          for a, b in itertools.product(intensities.i1, repeat=2)}
    d2 = {(a, b): decoy2_gain(params, a, b, distance_km)
          for a, b in itertools.product(intensities.i2, repeat=2)}
    return GainTable(intensities.mu, q, e, d1, d2, provenance="modeled")
