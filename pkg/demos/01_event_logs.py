"""Event logs, matrix encodings, and why per-event argmax is not enough.

A process log assigns each case a sequence of activities. When the log
comes from an uncertain source (a sensor, a video classifier), each event
is only known as a probability distribution over activities: a
stochastically-known (SK) trace. This script builds the small worked
example used throughout the library and shows the argmax pitfall.
"""

import numpy as np

from tracediff import Alphabet, DKTrace, SKTrace, argmax_decode, compute_metrics, encode

# Five activities; one case with six events. The ground truth is known
# deterministically (DK).
alphabet = Alphabet(("A", "B", "C", "D", "E"))
truth = DKTrace("case-1", tuple(alphabet.index(a) for a in ("A", "B", "E", "C", "D", "E")))
print("ground truth:", " ".join(truth.labels(alphabet)))

# The uncertain observation of the same case: one probability vector per
# event. Note events 1 and 3: the true activity is *not* the most probable.
observed = SKTrace(
    "case-1",
    np.array(
        [
            [0.33, 0.03, 0.15, 0.15, 0.34],
            [0.20, 0.25, 0.15, 0.20, 0.20],
            [0.50, 0.10, 0.10, 0.10, 0.20],
            [0.05, 0.15, 0.55, 0.05, 0.20],
            [0.10, 0.05, 0.25, 0.45, 0.15],
            [0.10, 0.05, 0.25, 0.25, 0.35],
        ]
    ),
)

# Both trace kinds encode to K x max_len column matrices with a padding
# mask, which is what every downstream component consumes.
dk_matrix = encode(truth, alphabet, max_len=8)
sk_matrix = encode(observed, alphabet, max_len=8)
print("\nDK matrix (columns are events, one-hot):")
print(dk_matrix.data[:, : len(truth)].astype(int))
print("mask:", dk_matrix.mask.astype(int))
print("\nSK matrix (columns sum to one):")
print(sk_matrix.data[:, : len(truth)])

# The naive recovery picks the most probable activity per event
# independently. Here it gets the first and third events wrong because the
# observation noise put more mass elsewhere.
guess = argmax_decode(sk_matrix)
print("\nargmax recovery:", " ".join(guess.labels(alphabet)))
report = compute_metrics([guess], [truth])
print(f"accuracy {report.accuracy:.3f}  (4 of 6 positions)")
print(f"macro precision {report.macro_precision:.3f}, macro recall {report.macro_recall:.3f}")

# Recovering those positions needs process context; demos 04 and 05 show
# the diffusion denoiser doing exactly that.
