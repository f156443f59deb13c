"""motionpin: studying how motion/orientation sensor streams leak PIN entry.

Capture or synthesize 12-channel mobile sensor traces, window them around
keydown events, reduce each window to a fixed 114-value feature vector, train
a one-hidden-layer classifier with scaled conjugate gradient, and score
top-k identification rates against guessing baselines.
"""

__version__ = "0.1.0"
