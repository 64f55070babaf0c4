"""Recover photon-counting observables from a sampled conductance trace.

Step detection uses a two-sided moving-window mean difference: at each
sample boundary the statistic is mean(next `window` samples) minus
mean(previous `window` samples).  A step is declared at a local maximum of
the statistic that exceeds `threshold` standard errors of the statistic
under pure noise (sigma * sqrt(2/window), with sigma estimated robustly
from first differences).  Only upward steps are accepted, which separates
photon events from a random telegraph signal that moves both ways.  After
a detection the next `window` samples are refractory; if two candidates
fall inside one window the larger statistic wins, the earlier one on a tie.

Interval statistics: the exponential maximum-likelihood rate of the
inter-event intervals is n / sum(intervals), and the Kolmogorov-Smirnov
statistic against that fitted exponential measures how Poissonian the
event stream is.

Height correlation: each detected height is paired with the transport
model's dG/dV_g at the step's operating point (found by inverting the
model conductance at the mid-step level); height / transconductance then
estimates the per-trap gate-shift coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .simulate import Trace
from .transport import TIME_AXIS, DeviceParams, conductance, transconductance

DEFAULT_WINDOW = 12
DEFAULT_THRESHOLD = 4.0

# a step whose operating point has less than this fraction of the device's
# peak transconductance sits on a plateau: height/slope is meaningless there
# and the implied coupling is reported as undefined
RELATIVE_TRANSCONDUCTANCE_FLOOR = 1e-3

# fewer detected steps than this cannot certify saturation of an active run
MIN_STEPS_FOR_SATURATION = 10

_MAD_TO_SIGMA = 0.6744897501960817  # Phi^-1(0.75): MAD -> sigma for a Gaussian


@dataclass(frozen=True)
class StepEvent:
    time: float        # s
    height: float      # conductance jump, units of 2e^2/h (> 0)
    confidence: float  # detection statistic in units of its noise SE


@dataclass(frozen=True)
class IntervalFit:
    event_count: int        # number of events behind the fit (intervals + 1)
    mean_interval: float    # s
    rate: float             # 1/s, = 1/mean_interval
    ks_statistic: float     # sup |empirical CDF - fitted exponential CDF|


@dataclass
class AnalysisReport:
    steps: list[StepEvent]
    interval_fit: IntervalFit | None
    height_correlation: float            # Pearson r, nan when undefined
    implied_couplings: list[float]       # V per step, nan where g ~ 0
    transconductances: list[float]       # model dG/dVg per step
    saturation_detected: bool
    total_conductance_rise: float
    correlation_status: str = "ok"       # "ok" | "insufficient events" | "undefined"
    window: int = DEFAULT_WINDOW
    threshold: float = DEFAULT_THRESHOLD
    histogram: tuple = field(default_factory=tuple)  # (bin starts, counts)


def estimate_noise_sigma(samples: np.ndarray) -> float:
    """Robust per-sample noise from the MAD of first differences.

    Insensitive to sparse steps; exactly zero for a noiseless staircase.
    """
    d = np.diff(np.asarray(samples, dtype=float))
    if d.size == 0:
        return 0.0
    mad = np.median(np.abs(d - np.median(d)))
    return float(mad / _MAD_TO_SIGMA / math.sqrt(2.0))


def _mean_difference(samples: np.ndarray, window: int):
    """Statistic d[j] = mean(x[i:i+w]) - mean(x[i-w:i]) at boundaries i = w..n-w."""
    c = np.concatenate([[0.0], np.cumsum(samples)])
    i = np.arange(window, samples.size - window + 1)
    d = (c[i + window] - 2.0 * c[i] + c[i - window]) / window
    return i, d


def detect_steps(trace: Trace, window: int = DEFAULT_WINDOW,
                 threshold: float = DEFAULT_THRESHOLD) -> list[StepEvent]:
    """Locate upward conductance steps in a time trace."""
    if trace.axis_kind != TIME_AXIS:
        raise ValueError("step detection requires a time-axis exposure trace")
    if window < 2:
        raise ValueError("window must be >= 2")
    x = trace.conductance
    if x.size < 2 * window:
        raise ValueError("trace must contain at least 2*window samples")

    boundaries, d = _mean_difference(x, window)
    sigma = estimate_noise_sigma(x)
    se = sigma * math.sqrt(2.0 / window)
    floor = max(threshold * se, 1e-12)

    # local maxima of the statistic above the detection floor; ties keep
    # the earlier sample
    j = np.arange(1, d.size - 1)
    cand = j[(d[j] > d[j - 1]) & (d[j] >= d[j + 1]) & (d[j] > floor)]

    accepted: list[int] = []
    for c in cand:
        if accepted and c - accepted[-1] < window:
            if d[c] > d[accepted[-1]]:
                accepted[-1] = int(c)
        else:
            accepted.append(int(c))

    steps = []
    for c in accepted:
        conf = float(d[c] / se) if se > 0 else math.inf
        steps.append(StepEvent(time=float(trace.times[boundaries[c]]),
                               height=float(d[c]), confidence=conf))
    return steps


def interval_histogram(events: list[StepEvent], bin_width: float):
    """Histogram of successive inter-event intervals.

    Returns (bin starts, counts); counts sum to len(events) - 1.
    """
    if len(events) < 2:
        raise ValueError("need at least 2 events for an interval histogram")
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    times = np.array([e.time for e in events])
    intervals = np.diff(times)
    bins = np.floor(intervals / bin_width).astype(int)
    counts = np.bincount(bins)
    starts = np.arange(counts.size) * bin_width
    return starts, counts


def fit_exponential(intervals) -> IntervalFit:
    """Exponential MLE of inter-event intervals plus a KS goodness-of-fit.

    The MLE rate is n / sum(intervals); the KS statistic is the sup
    distance between the empirical CDF and the fitted exponential CDF.
    """
    x = np.sort(np.asarray(intervals, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 intervals")
    if np.any(x <= 0):
        raise ValueError("intervals must all be > 0")
    mean = float(x.mean())
    rate = 1.0 / mean
    cdf = 1.0 - np.exp(-rate * x)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    ks = float(max(np.max(upper - cdf), np.max(cdf - lower)))
    return IntervalFit(event_count=n + 1, mean_interval=mean, rate=rate,
                       ks_statistic=ks)


def _operating_range(device: DeviceParams):
    lo = device.threshold_voltage - 1.0
    hi = device.threshold_voltage + (
        device.num_modes * device.mode_spacing + 4.0
    ) / device.lever_arm
    return lo, hi


def _invert_conductance(g_target: float, device: DeviceParams) -> float | None:
    """Gate voltage at which the model conductance equals g_target."""
    lo, hi = _operating_range(device)
    g_lo = conductance(lo, device)
    g_hi = conductance(hi, device)
    if not g_lo < g_target < g_hi:
        return None
    return float(brentq(lambda v: conductance(v, device) - g_target, lo, hi,
                        xtol=1e-13))


def _peak_transconductance(device: DeviceParams) -> float:
    lo, hi = _operating_range(device)
    grid = np.linspace(lo, hi, 2001)
    return float(np.max(transconductance(grid, device)))


def correlate_heights(steps: list[StepEvent], trace: Trace,
                      device: DeviceParams, window: int = DEFAULT_WINDOW):
    """Pair detected step heights with the model transconductance.

    For each step the operating point is recovered by inverting the model
    conductance at the mid-step level; the implied per-trap coupling is
    height / dG/dVg there.  Steps on plateaus (transconductance ~ 0) get an
    undefined (nan) coupling and are excluded from the Pearson correlation.

    Returns (pearson_r, implied couplings, transconductances); the latter
    two are aligned with `steps`.
    """
    if len(steps) < 3:
        raise ValueError("need at least 3 steps to correlate heights")
    x = trace.conductance
    implied = np.full(len(steps), np.nan)
    trans = np.full(len(steps), np.nan)
    heights = np.array([s.height for s in steps])
    slope_floor = RELATIVE_TRANSCONDUCTANCE_FLOOR * _peak_transconductance(device)

    for k, step in enumerate(steps):
        i = int(np.searchsorted(trace.times, step.time))
        lo = max(0, i - window)
        if i <= lo:
            continue
        g_before = float(np.mean(x[lo:i]))
        v_mid = _invert_conductance(g_before + 0.5 * step.height, device)
        if v_mid is None:
            continue
        g_slope = float(transconductance(v_mid, device))
        trans[k] = g_slope
        if g_slope > slope_floor:
            implied[k] = step.height / g_slope

    valid = ~np.isnan(implied)
    if valid.sum() < 2:
        return math.nan, implied.tolist(), trans.tolist()
    h, g = heights[valid], trans[valid]
    if np.ptp(h) == 0 or np.ptp(g) == 0:
        return math.nan, implied.tolist(), trans.tolist()
    r = float(np.corrcoef(h, g)[0, 1])
    return r, implied.tolist(), trans.tolist()


def _linear_slope(t: np.ndarray, x: np.ndarray, sigma: float):
    """Least-squares slope and its standard error given per-sample noise."""
    t0 = t - t.mean()
    denom = float(np.dot(t0, t0))
    if denom == 0:
        return 0.0, math.inf
    slope = float(np.dot(t0, x - x.mean()) / denom)
    se = sigma / math.sqrt(denom) if sigma > 0 else 0.0
    return slope, se


def saturation_summary(steps: list[StepEvent], trace: Trace,
                       tail_fraction: float = 0.1):
    """Decide whether the photoresponse has saturated.

    The trailing portion of the run must be statistically flat while the
    earlier portion rises; a trace that never rose at all (a dark run) is
    trivially saturated.  The tail is the trailing `tail_fraction` of the
    samples, widened to at least three detected inter-event gaps so a
    quiet stretch of an active run is not mistaken for saturation, and a
    run with only a handful of events carries too little evidence to
    certify anything.

    Returns (saturation_detected, step_count, total_conductance_rise).
    """
    x = trace.conductance
    t = trace.times
    n = x.size
    m = max(4, n // 50)
    total_rise = float(np.mean(x[-m:]) - np.mean(x[:m]))
    sigma = estimate_noise_sigma(x)

    # flat-at-all-times trace: already at its asymptote
    rise_floor = 6.0 * sigma * math.sqrt(2.0 / m) + 1e-12
    if abs(total_rise) <= rise_floor:
        return True, len(steps), total_rise

    if len(steps) < MIN_STEPS_FOR_SATURATION:
        return False, len(steps), total_rise

    tail_len = int(math.ceil(tail_fraction * n))
    gaps = np.diff([s.time for s in steps])
    dt = float(np.median(np.diff(t)))
    tail_len = max(tail_len, int(math.ceil(3.0 * float(np.mean(gaps)) / dt)))
    if tail_len >= n - m:
        return False, len(steps), total_rise  # too short a run to certify

    tail_slope, tail_se = _linear_slope(t[-tail_len:], x[-tail_len:], sigma)
    head_slope, head_se = _linear_slope(t[:n - tail_len], x[:n - tail_len], sigma)
    tail_flat = abs(tail_slope) <= 3.0 * tail_se + 1e-15
    head_rising = head_slope > 5.0 * head_se
    return bool(tail_flat and head_rising), len(steps), total_rise


def analyze_trace(trace: Trace, device: DeviceParams | None = None,
                  window: int = DEFAULT_WINDOW,
                  threshold: float = DEFAULT_THRESHOLD,
                  bin_width: float | None = None) -> AnalysisReport:
    """Full analysis pipeline: detection, interval fit, correlation, saturation."""
    from .simulate import device_from_config

    if device is None:
        try:
            device = device_from_config(trace.config)
        except KeyError as exc:
            raise ValueError(
                "trace header carries no device parameters; pass device="
            ) from exc
    steps = detect_steps(trace, window=window, threshold=threshold)

    fit = None
    histogram: tuple = ()
    if len(steps) >= 3:
        intervals = np.diff([s.time for s in steps])
        fit = fit_exponential(intervals)
        width = bin_width if bin_width else fit.mean_interval / 3.0
        histogram = interval_histogram(steps, width)

    if len(steps) >= 3:
        r, implied, trans = correlate_heights(steps, trace, device, window=window)
        status = "undefined" if math.isnan(r) else "ok"
    else:
        r, implied, trans = math.nan, [math.nan] * len(steps), [math.nan] * len(steps)
        status = "insufficient events"

    saturated, count, rise = saturation_summary(steps, trace)
    return AnalysisReport(
        steps=steps, interval_fit=fit, height_correlation=r,
        implied_couplings=implied, transconductances=trans,
        saturation_detected=saturated, total_conductance_rise=rise,
        correlation_status=status, window=window, threshold=threshold,
        histogram=histogram,
    )


# ---------------------------------------------------------------------------
# Report file: '#' header, then [steps] [intervals] [fit] [correlation]
# [saturation] sections with fixed column order.
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_text(report: AnalysisReport) -> str:
    lines = [
        "# qpcsim analysis report v1",
        f"# window={report.window}",
        f"# threshold={_fmt(float(report.threshold))}",
    ]
    lines.append("[steps]")
    lines.append("time_s,height_G0,confidence,transconductance_G0_per_V,implied_coupling_V")
    for s, g, c in zip(report.steps, report.transconductances,
                       report.implied_couplings):
        lines.append(f"{_fmt(s.time)},{_fmt(s.height)},{_fmt(s.confidence)},"
                     f"{_fmt(float(g))},{_fmt(float(c))}")
    lines.append("[intervals]")
    lines.append("bin_start_s,count")
    if report.histogram:
        for start, count in zip(*report.histogram):
            lines.append(f"{_fmt(float(start))},{int(count)}")
    lines.append("[fit]")
    lines.append("event_count,mean_interval_s,rate_per_s,ks_statistic")
    if report.interval_fit is not None:
        f = report.interval_fit
        lines.append(f"{f.event_count},{_fmt(f.mean_interval)},{_fmt(f.rate)},"
                     f"{_fmt(f.ks_statistic)}")
    lines.append("[correlation]")
    lines.append("pearson_r,n_used,mean_implied_coupling_V,status")
    valid = [c for c in report.implied_couplings if not math.isnan(c)]
    mean_implied = float(np.mean(valid)) if valid else math.nan
    lines.append(f"{_fmt(float(report.height_correlation))},{len(valid)},"
                 f"{_fmt(mean_implied)},{report.correlation_status}")
    lines.append("[saturation]")
    lines.append("saturation_detected,step_count,total_rise_G0")
    lines.append(f"{_fmt(report.saturation_detected)},{len(report.steps)},"
                 f"{_fmt(report.total_conductance_rise)}")
    return "\n".join(lines) + "\n"


def write_report(report: AnalysisReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_to_text(report))
