# %% [markdown]
# # Driving the pipeline from configuration files
#
# Each subcommand reads a JSON run configuration and writes JSON reports
# plus CSV plot data into the output directory.

# %%
import json
import pathlib
import tempfile

from nedspec.cli import main

out = pathlib.Path(tempfile.mkdtemp())
cfg = {
    "system": {"kind": "builtin", "name": "constant_diag", "params": [2.0, 0.5]},
    "window": [-30, 30],
    "output_dir": str(out),
}
path = out / "config.json"
path.write_text(json.dumps(cfg))

# %%
for argv in (["spectrum"], ["reduce"], ["bundles", "--gamma", "1.0"]):
    code = main([*argv, "--config", str(path)])
    print(argv[0], "exit", code)

# %%
print(sorted(p.name for p in out.iterdir()))
print((out / "spectrum_scan.csv").read_text().splitlines()[:4])
