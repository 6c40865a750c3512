# coding: utf-8

# # Fisher information of a programmable interferometer
#
# A four-mode circuit encodes three unknown phases `phi` between two fixed
# mixing sections. Three control phases `theta` sit on the same arms and can
# be tuned. This notebook looks at how much `theta` changes the classical
# bound Tr[F^-1] and how close it can get to the quantum limit.

# In[1]:

import numpy as np

from varmetro.circuit import default_device, NoiseConfig
from varmetro.fisher import circuit_fisher, device_qfi, trace_inverse, SingularFisherError
from varmetro.triplets import resolve


# The quantum limit depends only on the probe state and the encoding. For a
# single photon spread evenly over four arms it is 6. With two photons in
# neighbouring input arms it drops to 2.5.

# In[2]:

for probe in ("single", "two"):
    spec = default_device(probe)
    print(probe, "photon  Tr[Q^-1] =", round(device_qfi(spec).trace_inverse(), 6))


# Now the classical bound at one built-in phase triplet, first with the
# control phases switched off and then over a cloud of random settings.

# In[3]:

spec = default_device("two")
phi = resolve("paper:s1")
print("theta = 0   Tr[F^-1] =", round(trace_inverse(circuit_fisher(spec, phi, np.zeros(3))), 3))

rng = np.random.default_rng(0)
thetas = rng.uniform(-np.pi, np.pi, (500, 3))
costs = []
for theta in thetas:
    try:
        costs.append(trace_inverse(circuit_fisher(spec, phi, theta)))
    except SingularFisherError:
        costs.append(np.inf)
costs = np.array(costs)
print("random theta: median %.2f, best %.3f" % (np.median(costs), costs.min()))


# Finite visibility flattens the landscape. The best random setting loses
# part of its advantage once the output is mixed with a uniform background.

# In[4]:

best = thetas[np.argmin(costs)]
for v in (1.0, 0.9, 0.7):
    f = circuit_fisher(spec, phi, best, NoiseConfig(visibility=v))
    print("visibility", v, " Tr[F^-1] at the best random theta:", round(trace_inverse(f), 3))
