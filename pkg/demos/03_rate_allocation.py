# %% [markdown]
# # Average rate allocation (ARA)
#
# With uniform power the rate split is a water-filling on the outage
# slopes.  Higher-order streams carry more rate, and the diversity of the
# system improves.

# %%
import numpy as np

from codedvblast import (
    RateSpec,
    SystemConfig,
    ara_closed_form,
    ara_diversity,
    ara_exact,
    diversity_fit,
    exact_outage,
)

spec = RateSpec.multiplexing(2 / 3)
points = []
for snr_db in range(15, 51, 5):
    cfg = SystemConfig.from_db(2, 2, snr_db)
    cf, coef = ara_closed_form(cfg, spec)
    opt, _ = ara_exact(cfg, spec, objective="exact")
    p = exact_outage(cfg, opt.powers, opt.rates)
    points.append((cfg.gamma0, p))
    print(f"{snr_db:>3} dB  closed R={cf.rates.round(3)}  solver R={opt.rates.round(3)}  P={p:.3e}")

# %%
fit = diversity_fit(points, (30, 50))
print(f"fitted diversity {fit.slope:.3f}, predicted {ara_diversity(cfg, spec, 2):.3f}")
