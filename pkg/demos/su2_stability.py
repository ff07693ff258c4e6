#|
# Recover an exact spin representation from a noisy triple
import numpy as np
from repstab.su2 import perturbed_triple, stabilize_su2, su2_defects
from repstab.quantization import order_fit
#-------------

#|
# Noise of norm eta/k^2 on each generator keeps R1 and R2 (which carries a factor k) of order one
ks = [16, 32, 64, 128]
worst = []
for k in ks:
    d = []
    for s in range(5):
        t = perturbed_triple(k, k, 1.0 / k**2, np.random.default_rng([s, k]))
        r = stabilize_su2(t)
        d.append(max(r.distances))
    r1, r2, _ = su2_defects(t)
    print(f"k={k:4d}  R1={r1:.3f}  R2={r2:.3f}  dim={r.rep.n}  max distance={max(d):.2e}")
    worst.append(max(d))
#------------------

#|
# The distance stays bounded; for random noise it even decays
print("slope of max distance:", round(order_fit(ks, worst)[0], 3))
#------------------
