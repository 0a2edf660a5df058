"""Shared binary-container plumbing: framed little-endian IO and checksums.

Both on-disk formats (network checkpoints and frame datasets) end with a
64-bit checksum of everything between the magic bytes and the checksum
itself. The checksum is (adler32 << 32) | crc32 over the payload.
"""

import struct
import zlib


class ContainerError(Exception):
    """Base for malformed container files."""


class BadMagicError(ContainerError):
    """File does not start with the expected magic/version."""


class TruncatedFileError(ContainerError):
    """File ends before the declared payload does."""


class ChecksumError(ContainerError):
    """Payload bytes do not match the trailing checksum."""


class Checksum64:
    def __init__(self):
        self._crc = 0
        self._adler = 1

    def update(self, data):
        self._crc = zlib.crc32(data, self._crc)
        self._adler = zlib.adler32(data, self._adler)

    def digest(self):
        return (self._adler << 32) | self._crc


def checksum64(data):
    c = Checksum64()
    c.update(data)
    return c.digest()


class PayloadWriter:
    """Accumulates payload bytes and their running checksum."""

    def __init__(self, fh):
        self._fh = fh
        self._sum = Checksum64()

    def write(self, data):
        self._fh.write(data)
        self._sum.update(data)

    def pack(self, fmt, *values):
        self.write(struct.pack(fmt, *values))

    def finish(self):
        """Append the checksum (not itself checksummed)."""
        self._fh.write(struct.pack("<Q", self._sum.digest()))


class PayloadReader:
    """Reads payload bytes while tracking the running checksum."""

    def __init__(self, fh):
        self._fh = fh
        self._sum = Checksum64()

    def read(self, n, what="payload"):
        data = self._fh.read(n)
        if len(data) != n:
            raise TruncatedFileError(f"file truncated while reading {what}")
        self._sum.update(data)
        return data

    def unpack(self, fmt, what="field"):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt), what))

    def verify(self):
        """Consume the trailing checksum and compare; must be at payload end."""
        expected = self._sum.digest()
        tail = self._fh.read(8)
        if len(tail) != 8:
            raise TruncatedFileError("file truncated before checksum")
        (stored,) = struct.unpack("<Q", tail)
        if stored != expected:
            raise ChecksumError(f"checksum mismatch: stored {stored:#x}, computed {expected:#x}")
        if self._fh.read(1):
            raise ContainerError("trailing bytes after checksum")


def expect_magic(fh, magic):
    head = fh.read(len(magic))
    if head != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {head!r}")
