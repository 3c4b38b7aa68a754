#!/usr/bin/env python3
"""Regenerate the committed golden /predict responses under tests/data/.

Run repo-root relative: ``python3 scripts/make_golden.py``. Two goldens are
produced, both with the model_id masked to "*":

  golden_predict_frozen.json  seeded untrained tiny model (service contract)
  golden_predict_e2e.json     full ingest -> train -> export -> serve pipeline

Rerun only when the recipe in tests/golden_helpers.py changes, and commit the
result.
"""

import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from fastapi.testclient import TestClient  # noqa: E402

from veriframe.service import ServiceConfig, ServiceState, create_app  # noqa: E402

import golden_helpers as gh  # noqa: E402


def response_bytes(artifact_dir: Path) -> bytes:
    config = ServiceConfig(model_artifact=str(artifact_dir), detector="stub")
    app = create_app(config, ServiceState(config))
    with TestClient(app) as client:
        response = client.post(
            f"/api/v1/predict?seed={gh.REQUEST_SEED}",
            files={"file": ("probe.png", gh.golden_image_bytes(), "image/png")},
        )
    response.raise_for_status()
    return gh.mask_model_id(response.content)


def main() -> None:
    gh.DATA_DIR.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        frozen = Path(tmp) / "frozen"
        gh.export_frozen_artifact(frozen)
        (gh.DATA_DIR / "golden_predict_frozen.json").write_bytes(
            response_bytes(frozen)
        )
        print("wrote golden_predict_frozen.json")

    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        output_root = gh.build_e2e_corpus(workdir)
        artifact = workdir / "artifact"
        _, history, _ = gh.run_e2e_training(output_root, artifact)
        print(f"e2e trained: final val accuracy {history[-1].val_accuracy:.4f}")
        (gh.DATA_DIR / "golden_predict_e2e.json").write_bytes(
            response_bytes(artifact)
        )
        print("wrote golden_predict_e2e.json")


if __name__ == "__main__":
    main()
