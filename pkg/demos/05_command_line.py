"""
Command line: solve, sweep and verify records
=============================================

The ``qesquartic`` command writes JSON (or CSV) records that can be
checked again later with ``verify``.
"""

# %%
import io
import json
import pathlib
import tempfile

from qesquartic.cli import main

out = io.StringIO()
code = main(["solve", "--N", "2", "--ell", "1", "--beta", "1/2", "--gamma", "1/3"], out=out)
record = json.loads(out.getvalue())
print("exit", code, "with", len(record["solutions"]), "solutions")

# %%
# ``verify`` recomputes residuals, kernels, minors and the ODE identity.
path = pathlib.Path(tempfile.mkdtemp()) / "solve.json"
path.write_text(out.getvalue())
print("verify exit code:", main(["verify", str(path)], out=io.StringIO()))

# %%
# A tampered record fails with exit code 3.
record["solutions"][0]["E_re"] += 1e-3
path.write_text(json.dumps(record))
print("tampered record exit code:", main(["verify", str(path)], out=io.StringIO()))

# %%
# The leading-order multiplets in CSV form.
main(["asymptotic", "--N", "4", "--format", "csv"])
