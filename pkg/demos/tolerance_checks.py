"""How much delay a cluster can absorb, and what the bounds say about it."""

from wpsgd import DelayProfile, LossParams, TheoryParams, corollary3_holds, corollary4_holds, theorem4_bound
from wpsgd.theory import corollary_report

loss = LossParams(lam=0.01, eta=1e-4)

for k in (1, 2, 4, 10):
    print(f"k={k:>2} zero delays tolerated: {corollary3_holds(DelayProfile.zeros(k), loss)}")

# largest common lag of nine slow nodes that still passes, for a fitted rate
r = 0.99999
lo, hi = 0, 10**7
while hi - lo > 1:
    mid = (lo + hi) // 2
    lo, hi = (mid, hi) if corollary4_holds(DelayProfile((0,) + (mid,) * 9), r) else (lo, mid)
print(f"rate {r}: nine nodes may lag up to {lo} iterations")
print("at that lag:", corollary_report(DelayProfile((0,) + (lo,) * 9), r))

for t in (10**4, 10**5, 10**6, 10**8):
    tp = TheoryParams(G=1.0, lam=0.01, eta=1e-4, delays=DelayProfile((0, 5, 10, 20)), t=t, residual=0.25)
    print(f"t={t:>9}: objective gap bound {theorem4_bound(tp):.6g}")
