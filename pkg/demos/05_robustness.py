# %% [markdown]
# # How sensitive is the optimum?
#
# The sensitivity is the relative change of the optimized outage per
# relative change of a power or rate.  Closed forms, finite differences and
# the Lagrange-multiplier form are shown side by side.

# %%
from codedvblast import RateSpec, SystemConfig, optimum, sensitivity_closed_form, sensitivity_finite_difference

cfg = SystemConfig.from_db(2, 2, 30.0)
for strategy, spec in (("APA", RateSpec.fixed(2.0)), ("ARA", RateSpec.multiplexing(1.0)),
                       ("APRA", RateSpec.multiplexing(1.0))):
    alloc, diag = optimum(cfg, spec, strategy, "exact")
    print(strategy)
    for rep in sensitivity_closed_form(cfg, spec, strategy):
        fd, mult = sensitivity_finite_difference(cfg, spec, strategy, rep.parameter, alloc=alloc,
                                                 diagnostics=diag)
        print(f"  {rep.parameter:<8} closed {rep.delta:7.4f}  finite diff {fd.delta:7.4f}  "
              f"multiplier {mult.delta:7.4f}")
