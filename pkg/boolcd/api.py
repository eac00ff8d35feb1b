import tempfile
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile

from . import __version__
from .batch_tucker import fit_best_of
from .config import ErrorKind, FitConfig, Ranks
from .errors import BoolcdError
from .ingestion import load_tensor_btt
from .reports import FrameSpec, feature_variance
from .tensor_core import BoolTensor3


app = FastAPI(
    title="boolcd API",
    description="Boolean Tucker factorization and change reports",
    version=__version__,
)


async def _read_tensor(upload: UploadFile) -> BoolTensor3:
    """Parse an uploaded .btt file."""
    payload = await upload.read()
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "upload.btt"
        path.write_bytes(payload)
        return load_tensor_btt(path)


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "version": __version__}


@app.post("/factorize")
async def api_factorize(
    tensor_file: UploadFile = File(...),
    ranks: str = Form(...),
    eps: float = Form(0.05),
    max_sweeps: int = Form(100),
    restarts: int = Form(1),
    seed: int = Form(0),
    error: str = Form("rel"),
):
    """
    Batch-fit an uploaded tensor.

    Returns:
        Error figures, stop status and the fitted model as 0/1 lists
    """
    try:
        x = await _read_tensor(tensor_file)
        config = FitConfig(
            ranks=Ranks.parse(ranks),
            error_threshold=eps,
            max_sweeps=max_sweeps,
            seed=seed,
            error_kind=ErrorKind.parse(error),
        )
        result = fit_best_of(x, config, restarts)
    except BoolcdError as e:
        raise HTTPException(status_code=400, detail=str(e))

    final = result.trace.final
    model = result.model
    return {
        "mismatches": final.mismatches,
        "relative": final.relative,
        "sweeps": len(result.trace),
        "status": result.trace.status.value,
        "restart": result.restart,
        "ranks": list(model.ranks.as_tuple()),
        "core": model.core.to_dense().tolist(),
        "a": model.a.to_dense().tolist(),
        "b": model.b.to_dense().tolist(),
        "c": model.c.to_dense().tolist(),
    }


@app.post("/feature-variance")
async def api_feature_variance(
    tensor_file: UploadFile = File(...),
    frames: int = Form(...),
):
    """Per (object, feature, frame) variance of an uploaded tensor."""
    try:
        x = await _read_tensor(tensor_file)
        report = feature_variance(x, FrameSpec(frames))
    except BoolcdError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return {
        "frames": list(report.frame_labels),
        "values": report.values.tolist(),
    }


def start_server(host: str = "127.0.0.1", port: int = 8000):
    """
    Start the boolcd API server.

    Args:
        host: Host address
        port: Port number
    """
    import uvicorn
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    start_server()
