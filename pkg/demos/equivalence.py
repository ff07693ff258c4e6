#|
# Conjugate one quantization into another through stabilized generators
from repstab.equivalence import equivalence_scan, sphere_family
from repstab.quantization import (TorusFunction, drifted_quantization, sphere_quadrature_quantization,
                                  sphere_spin_quantization, torus_theta_quantization)
#-------------

#|
# Sphere: spin matrices against quadrature Toeplitz operators on the harmonic family
fs, ids = sphere_family(4)
res = equivalence_scan(sphere_spin_quantization(), sphere_quadrature_quantization(), [64, 128, 256], fs, ids)
for fid, s in res.slopes.items():
    print(f"{fid:3s} slope {s}")
#------------------

#|
# Torus: translated theta model with a second-order change of variable
T = torus_theta_quantization()
Q = drifted_quantization(T, p=(0.3, 0.7), b=0.5)
u = [TorusFunction.u(1), TorusFunction.u(2)]
res = equivalence_scan(T, Q, [16, 32, 64, 128], u, ["u1", "u2"], mode="three_halves")
print("three_halves order:", round(res.fitted_order, 3))
for k in res.ks:
    print(k, "recovered p =", tuple(round(x, 6) for x in res.translations[k]))
#------------------
