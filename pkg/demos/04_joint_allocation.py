# %% [markdown]
# # Joint power and rate allocation (APRA)
#
# Switching a weak stream off hands its power to the others.  Below the
# threshold the APRA therefore keeps one stream active longer than the ARA
# and beats it; above the threshold the two coincide.

# %%
from codedvblast import (
    RateSpec,
    SystemConfig,
    apra_exact,
    apra_threshold,
    ara_exact,
    ara_threshold,
    exact_outage,
)

spec = RateSpec.multiplexing(1.0)
cfg = SystemConfig.from_db(2, 2, 20.0)
print("ARA threshold  %.2f dB" % ara_threshold(cfg, spec)[1])
print("APRA threshold %.2f dB" % apra_threshold(cfg, spec)[1])

# %%
for snr_db in (5, 10, 15, 20, 30):
    cfg = SystemConfig.from_db(2, 2, snr_db)
    a, _ = apra_exact(cfg, spec, objective="exact")
    r, _ = ara_exact(cfg, spec, objective="exact")
    pa, pr = exact_outage(cfg, a.powers, a.rates), exact_outage(cfg, r.powers, r.rates)
    print(f"{snr_db:>3} dB  APRA alpha={a.powers.round(3)}  APRA/ARA = {pa / pr:.3f}")
