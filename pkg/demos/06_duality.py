# %% [markdown]
# # Dual problems
#
# Instead of minimizing outage for a budget, ask for the least power (or
# the most rate) that meets an outage target.  Feeding the primal outage
# back as the target recovers the primal budget.

# %%
from codedvblast import (
    DualConstraint,
    RateSpec,
    SystemConfig,
    apa_exact,
    ara_exact,
    exact_outage,
    max_total_rate,
    min_total_power,
)

cfg = SystemConfig.from_db(2, 2, 25.0)
primal, _ = apa_exact(cfg, 2.0)
eps = exact_outage(cfg, primal.powers, primal.rates)
alloc, budget = min_total_power(cfg, 2.0, DualConstraint(eps))
print(f"APA  target {eps:.3e}: least total power {budget:.9f} (primal budget 2)")

spec = RateSpec.multiplexing(1.0)
primal, _ = ara_exact(cfg, spec, objective="exact")
eps = exact_outage(cfg, primal.powers, primal.rates)
alloc, total = max_total_rate(cfg, DualConstraint(eps))
print(f"ARA  target {eps:.3e}: largest total rate {total:.9f} (primal {spec.total_rate(cfg):.9f})")

# %%
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    _, budget = min_total_power(cfg, 2.0, DualConstraint(eps))
    _, total = max_total_rate(cfg, DualConstraint(eps))
    print(f"eps={eps:.0e}  power {budget:9.4f}  rate {total:7.4f} nats")
