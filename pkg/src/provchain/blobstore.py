"""Content-addressed blob storage.

Blobs live under ``<root>/<ref[0:2]>/<ref[2:4]>/<ref>``. There is no delete.
"""

import os
import tempfile
from pathlib import Path
from typing import Iterator

from provchain.constants import DEFAULT_MAX_BLOB_BYTES
from provchain.errors import CorruptBlob, NotFound, OversizeBlob
from provchain.log import get_logger
from provchain.utils.canonical import check_content_ref, digest

logger = get_logger(__name__)


class BlobStore:
    def __init__(self, root: Path | None = None, max_bytes: int = DEFAULT_MAX_BLOB_BYTES):
        """``root=None`` keeps blobs in memory."""
        self.root = root
        self.max_bytes = max_bytes
        self._memory: dict[str, bytes] = {}
        if root is not None:
            root.mkdir(parents=True, exist_ok=True)

    def path_for(self, ref: str) -> Path:
        if self.root is None:
            raise ValueError("in-memory blobstore has no paths")
        return self.root / ref[0:2] / ref[2:4] / ref

    def put(self, content: bytes) -> str:
        if len(content) > self.max_bytes:
            raise OversizeBlob(len(content), self.max_bytes)
        ref = digest(content)
        if self.root is None:
            self._memory.setdefault(ref, bytes(content))
            return ref

        path = self.path_for(ref)
        if path.is_file():
            return ref
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(content)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.debug("blob.stored", ref=ref, size=len(content))
        return ref

    def get(self, ref: str) -> bytes:
        check_content_ref(ref)
        if self.root is None:
            try:
                content = self._memory[ref]
            except KeyError:
                raise NotFound(ref) from None
        else:
            path = self.path_for(ref)
            if not path.is_file():
                raise NotFound(ref)
            content = path.read_bytes()
        if digest(content) != ref:
            raise CorruptBlob(ref)
        return content

    def __contains__(self, ref: str) -> bool:
        if self.root is None:
            return ref in self._memory
        return self.path_for(ref).is_file()

    def refs(self) -> Iterator[str]:
        if self.root is None:
            yield from sorted(self._memory)
            return
        for path in sorted(self.root.glob("??/??/*")):
            if path.is_file() and not path.name.startswith(".tmp-"):
                yield path.name
