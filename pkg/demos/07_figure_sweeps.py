# %% [markdown]
# # Figure data from the checked-in recipes
#
# Each file in configs/ describes one sweep.  The rows are plain CSV, so
# any plotting tool can draw the curves.

# %%
from pathlib import Path

from codedvblast import parse_config, rows_to_csv, run_sweep

recipe = Path(__file__).resolve().parents[1] / "configs" / "fig3_fig4_strategies.cfg"
config = parse_config(recipe)
rows = run_sweep(config, workers=4)
print(rows_to_csv([r for r in rows if r.snr_db in (5.0, 15.0, 25.0)], config.m))

# %% [markdown]
# At every SNR the strategies are ordered APRA <= ARA <= APA <= uniform.

# %%
for snr_db in (5.0, 15.0, 25.0, 35.0):
    p = {r.strategy: r.p_out_exact for r in rows if r.snr_db == snr_db}
    print(snr_db, " <= ".join(f"{s}:{p[s]:.2e}" for s in ("apra", "ara", "apa", "uniform")))
