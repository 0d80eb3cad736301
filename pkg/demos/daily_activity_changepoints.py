"""Changepoints in a day of binary activity sensors.

Four people each contribute 56 days of 15-minute yes/no activity flags, so
the panel is 96 time bins by 224 series. The global activity probability
switches at bins 28, 34 and 88. We detect the switches with the Bernoulli
GLMER cost, penalty 56 log 96, and attach bootstrap intervals for the
fixed-effect probability of each detected segment.

Run with ``python demos/daily_activity_changepoints.py``.
"""

import math

from mixedpelt.glmer import BERNOULLI, GlmerCost, bootstrap_fixed_effect_ci
from mixedpelt.pelt import pelt_detect
from mixedpelt.sim import BernoulliScenario, gen_bernoulli

scenario = BernoulliScenario("daily", replicates=56, global_change=True)
panel, truth, taus = gen_bernoulli(scenario, seed=3)
print(f"panel {panel.n} x {panel.P}, groups {panel.groups.sizes}")
print("true changepoints:", taus)
print("true global probabilities:", [round(float(p), 3) for p in truth.global_p])

model = GlmerCost(panel, BERNOULLI)
result = pelt_detect(model, 56 * math.log(96))
print("detected changepoints:", result.changepoints)


def clock(tau, minutes=15):
    # tau is the last bin of a segment, so the change happens at its end
    h, m = divmod(tau * minutes, 60)
    return f"{h:02d}:{m:02d}"


print("as clock times:", [clock(t) for t in result.changepoints])

cis = bootstrap_fixed_effect_ci(panel, result.segmentation, BERNOULLI, B=200, seed=1)
for (s, e), fit, (low, mean, high) in zip(result.segmentation.segments(),
                                          result.segment_fits, cis):
    print(f"bins {s + 1:3d}-{e:3d}: p = {fit.fixed_effect:.3f} "
          f"(95% CI {low:.3f} to {high:.3f}), sigma_b^2 = {fit.sigma_b2:.3g}")
