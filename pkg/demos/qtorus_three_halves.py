#|
# Almost unitary, almost q-commuting pairs collapse onto clock and shift
import numpy as np
from repstab.qtorus import perturbed_pair, stabilize_qtorus
from repstab.quantization import order_fit
#-------------

#|
# Multiply clock and shift by e^{iA/k^2} with |A| = 1 and stabilize
ks = [16, 32, 64, 128, 256]
worst = []
for k in ks:
    d = [max(stabilize_qtorus(perturbed_pair(k, k, 1.0, np.random.default_rng([s, k]))).distances)
         for s in range(3)]
    worst.append(max(d))
    print(f"k={k:4d}  max distance={worst[-1]:.2e}  k^1.5 * distance={worst[-1] * k**1.5:.3f}")
#------------------

#|
print("fitted order:", round(order_fit(ks, worst)[0], 3))
#------------------
