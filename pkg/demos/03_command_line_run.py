"""
The whole pipeline from the command line
=========================================

``assaygen`` runs ingest, index, retrieve, generate, optimize and evaluate as
separate subcommands, or all at once with ``run``.  Each stage writes its
artifacts into a run directory keyed by a digest of the configuration, so a
rerun with the same config and seed lands in the same place with the same bytes.

Here we build a throwaway workspace with synthetic assays and score files,
then drive the CLI with the mock provider.
"""

# %%
# A workspace: raw assay JSON (some with CSV activity tables), a targets file
# with reference and baseline scores, and a JSON config.
import json
import tempfile
from pathlib import Path

from assaygen.cli import main
from assaygen.synthetic import make_corpus, write_config, write_raw, write_targets

root = Path(tempfile.mkdtemp(prefix="assaygen-demo-"))
docs = make_corpus(48, seed=0)
raw = write_raw(root / "raw", docs)
targets = write_targets(root, docs, seed=0)
config = write_config(root, raw, seed=0)
print(json.dumps(json.loads(config.read_text())["hyperparameters"], indent=1))

# %%
# Stage by stage.  Running ``retrieve`` before ``index`` would exit with status 1
# and a message naming the missing step.
for stage in ("ingest", "index"):
    assert main([stage, "--config", str(config), "--mock-llm"]) == 0

# %%
# Everything else in one go, three targets in parallel.
status = main(["run", "--config", str(config), "--targets", str(targets), "--mock-llm", "--parallel", "3"])
print("exit status", status)

# %%
# The run directory holds one folder per target plus the cross-target summary.
(run_dir,) = (root / "runs").iterdir()
for path in sorted(run_dir.rglob("*")):
    if path.is_file() and "batches" not in path.parts:
        print(path.relative_to(run_dir))
print((run_dir / "report.csv").read_text())
