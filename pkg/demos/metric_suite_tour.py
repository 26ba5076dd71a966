"""Tour of the metric suite on hand-sized examples.

Run:  python3 demos/metric_suite_tour.py
"""

from rankforge import adt, ati, lor, paired_t_test, spam_flag_curve, spam_score
from rankforge.textops import insert_sentence

original = (
    "Panel output depends on the installation and local conditions. "
    "Annual records cover voltage details and common meter notes."
)
injected = insert_sentence(
    original, "Solar efficiency figures appear alongside the capacity summary.", 0
)

print("original:   ", original)
print("adversarial:", injected)

# Content fidelity: a pure contiguous injection inserts ATI tokens, costs
# exactly ATI token edits, and keeps the original fully recoverable (LOR 1.0).
print("\nATI (tokens inserted):   ", ati(original, injected))
print("ADT (token edit distance):", adt(original, injected))
print("LOR (subsequence recall): ", lor(original, injected))

# Stealth: term concentration. Repetitive keyword stuffing saturates the
# score; the measured injection barely moves it.
stuffed = original + " " + " ".join(["solar"] * 12)
print("\nspam score original :", round(spam_score(original), 3))
print("spam score injected :", round(spam_score(injected), 3))
print("spam score stuffed  :", round(spam_score(stuffed), 3))
thresholds = (0.40, 0.55, 0.70)
print("flag curve over [original, injected, stuffed]:")
print("  ", spam_flag_curve([original, injected, stuffed], thresholds))

# Significance: paired two-tailed t-test on per-pair boosts of two methods.
method_a = [68.0, 55.0, 71.0, 62.0, 49.0, 77.0, 64.0, 58.0, 66.0, 73.0]
method_b = [52.0, 50.0, 60.0, 48.0, 45.0, 61.0, 50.0, 47.0, 55.0, 58.0]
t, p = paired_t_test(method_a, method_b)
print(f"\npaired t-test on boosts: t={t:.3f}, p={p:.5f}", "(significant)" if p < 0.05 else "")
