"""Model files: magic ``XLEM``, header with method, languages, dimensions and
training configuration, one block of matrices per language."""
from __future__ import annotations

from pathlib import Path

from ..binfmt import ContainerFormatError, read_container, write_container
from .model import LanguageMap, ProjectionModel

MAGIC = b"XLEM"
ModelFormatError = ContainerFormatError


def save_model(model: ProjectionModel, path: str | Path) -> None:
    header = {"method": model.method, "m": len(model.langs), "langs": model.langs,
              "dims": model.dims, "config": model.config}
    blocks = [(digest, mp.matrices()) for digest, mp in zip(model.vocab_digests, model.maps)]
    write_container(path, MAGIC, header, blocks)


def load_model(path: str | Path) -> ProjectionModel:
    header, blocks = read_container(path, MAGIC)
    if header.get("m") != len(blocks) or len(header.get("langs", ())) != len(blocks):
        raise ModelFormatError("language count does not match the stored blocks")
    maps = []
    for _, mats in blocks:
        if header["method"] == "hubcca":
            if len(mats) != 2:
                raise ModelFormatError("hubcca blocks need two matrices")
            maps.append(LanguageMap(V=mats[0], W=mats[1]))
        else:
            if len(mats) != 1:
                raise ModelFormatError(f"{header['method']} blocks need one matrix")
            maps.append(LanguageMap(P=mats[0]))
    return ProjectionModel(header["method"], list(header["langs"]), maps, dict(header["dims"]),
                           dict(header["config"]), [tag for tag, _ in blocks])
