import math

import numpy as np
from hypothesis import strategies as st

from apsi.signal import APSignal, HarmonicComponent


def tone(omega, amplitude=1.0, phase=0.0):
    return APSignal((HarmonicComponent(omega, amplitude, phase),))


def spaced_signal(rng, n_lines, w_lo, w_hi, min_gap, amp=(0.5, 1.5)):
    """Random APSignal with lines in [w_lo, w_hi] at least `min_gap` apart."""
    for _ in range(10000):
        f = np.sort(rng.uniform(w_lo, w_hi, n_lines))
        if n_lines < 2 or np.min(np.diff(f)) >= min_gap:
            break
    else:
        raise RuntimeError("could not place lines")
    return APSignal.from_triples(
        (w, rng.uniform(*amp), rng.uniform(-math.pi, math.pi)) for w in f
    )


@st.composite
def well_spaced_signals(draw, max_lines=3):
    """Signals whose gaps between lines are at least the lowest frequency."""
    n = draw(st.integers(1, max_lines))
    w_min = draw(st.floats(0.5, 2.0))
    freqs = [w_min]
    for _ in range(n - 1):
        freqs.append(freqs[-1] + w_min * draw(st.floats(1.0, 3.0)))
    comps = [
        HarmonicComponent(
            w,
            draw(st.floats(0.1, 2.0)),
            draw(st.floats(-math.pi, math.pi)),
        )
        for w in freqs
    ]
    return APSignal(tuple(comps))



# acceptance verdicts, printed again in the terminal summary
RESULTS: list[str] = []


def report(number, name, ok, detail=""):
    line = f"criterion {number} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    RESULTS.append(line)
    print(line)
    return ok
