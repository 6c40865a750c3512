# coding: utf-8

# # Tuning the control phases from measured data
#
# The variational loop never looks at the state. It only sees count
# histograms at shifted settings, turns them into a Fisher matrix with the
# two- or four-term shift rules, and feeds Tr[F^-1] to a small Nelder-Mead
# search (20 evaluations, best of 3 restarts).

# In[1]:

import numpy as np

from varmetro.circuit import default_device, reference_device, NoiseConfig
from varmetro.experiments import variational_settings, exact_cost
from varmetro.triplets import resolve


# Start with the two-mode reference interferometer at 80% visibility. The
# optimum of Tr[F^-1] there is known in closed form: 1 / 0.64 = 1.5625.

# In[2]:

ref = reference_device()
noise = NoiseConfig(visibility=0.8)
theta, traces = variational_settings(ref, [1.0], noise, events=None, seed=0)
print("exact-probability loop:", round(min(t.best_cost for t in traces), 5))

theta, traces = variational_settings(ref, [1.0], noise, events=5000, seed=0)
print("5000 events per setting:", round(min(t.best_cost for t in traces), 4),
      "  true cost at the chosen theta:", round(exact_cost(ref, [1.0], theta, noise), 4))


# The same loop on the four-mode device with two photons. Each cost
# evaluation needs 1 + 4 * 3 * 2 = 25 circuit settings, because the two-photon
# response needs the four-term rule.

# In[3]:

spec = default_device("two")
for name in ("paper:s1", "paper:s4", "paper:s8"):
    phi = resolve(name)
    theta, traces = variational_settings(spec, phi, seed=1)
    print(name, " null %.2f -> variational %.2f" % (exact_cost(spec, phi, np.zeros(3)),
                                                   exact_cost(spec, phi, theta)))


# The traces keep every evaluation, so convergence is easy to inspect.

# In[4]:

best = traces[int(np.argmin([t.best_cost for t in traces]))]
print(np.round(best.best_so_far(), 3))
