"""Domain -> nameserver / IP enrichment backed by a JSON-lines store."""

from __future__ import annotations

import ipaddress
import json
import logging
import shutil
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

logger = logging.getLogger(__name__)

SKIP = "skip"
RESOLVE = "resolve"


class EnrichmentError(ValueError):
    pass


class ResolverError(RuntimeError):
    pass


def _norm_ns(host: str) -> str:
    return host.strip().lower().rstrip(".")


@dataclass(frozen=True)
class EnrichmentRecord:
    domain: str
    ips: tuple[str, ...] = ()
    nameservers: tuple[str, ...] = ()

    @classmethod
    def create(cls, domain: str, ips, nameservers) -> "EnrichmentRecord":
        domain = domain.strip().lower().rstrip(".")
        if not domain:
            raise EnrichmentError("domain must be nonempty")
        clean_ips = []
        for ip in ips:
            try:
                clean_ips.append(str(ipaddress.ip_address(str(ip).strip())))
            except ValueError:
                raise EnrichmentError(f"invalid IP address {ip!r} for {domain}") from None
        ns = [_norm_ns(n) for n in nameservers if _norm_ns(n)]
        return cls(domain, tuple(dict.fromkeys(clean_ips)), tuple(dict.fromkeys(ns)))

    def to_json(self) -> str:
        return json.dumps(
            {"domain": self.domain, "ips": list(self.ips), "nameservers": list(self.nameservers)},
            separators=(",", ":"),
        )


class Resolver(Protocol):
    def resolve(self, domain: str) -> tuple[list[str], list[str]]:
        """Return ``(nameservers, ips)`` for ``domain`` or raise ResolverError."""
        ...


class DigResolver:
    """Shells out to ``dig +short`` for NS and A/AAAA records."""

    def __init__(self, timeout: float = 5.0, dig: str = "dig"):
        self.timeout = timeout
        self.dig = dig

    def _query(self, domain: str, rtype: str) -> list[str]:
        if shutil.which(self.dig) is None:
            raise ResolverError(f"{self.dig} not found on PATH")
        try:
            out = subprocess.run(
                [self.dig, "+short", rtype, domain],
                capture_output=True, text=True, timeout=self.timeout, check=True,
            ).stdout
        except (subprocess.SubprocessError, OSError) as exc:
            raise ResolverError(f"{rtype} lookup for {domain} failed: {exc}") from exc
        return [line.strip() for line in out.splitlines() if line.strip()]

    def resolve(self, domain: str) -> tuple[list[str], list[str]]:
        ns = self._query(domain, "NS")
        ips = []
        for rtype in ("A", "AAAA"):
            for ans in self._query(domain, rtype):
                try:
                    ipaddress.ip_address(ans)
                except ValueError:
                    continue  # CNAME targets etc.
                ips.append(ans)
        return ns, ips


@dataclass
class EnrichmentStore:
    records: dict[str, EnrichmentRecord] = field(default_factory=dict)
    policy: str = SKIP
    writeback_path: Path | None = None
    duplicate_warnings: int = 0
    rejected: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __getstate__(self) -> dict:
        state = dict(self.__dict__)
        del state["_lock"]  # fold workers get their own
        return state

    def __setstate__(self, state: dict) -> None:
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def get(self, domain: str) -> EnrichmentRecord | None:
        return self.records.get(domain.strip().lower().rstrip("."))

    def __contains__(self, domain: str) -> bool:
        return self.get(domain) is not None

    def __len__(self) -> int:
        return len(self.records)

    def add(self, record: EnrichmentRecord) -> None:
        with self._lock:
            self.records[record.domain] = record
            if self.writeback_path is not None:
                with open(self.writeback_path, "a", encoding="utf-8") as fh:
                    fh.write(record.to_json() + "\n")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for domain in sorted(self.records):
                fh.write(self.records[domain].to_json() + "\n")


def load_enrichment(path: str | Path, policy: str = SKIP) -> EnrichmentStore:
    store = EnrichmentStore(policy=policy)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                domain = obj["domain"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EnrichmentError(f"malformed enrichment record at line {lineno}: {exc}") from None
            try:
                rec = EnrichmentRecord.create(domain, obj.get("ips", []), obj.get("nameservers", []))
            except EnrichmentError as exc:
                logger.warning("line %d rejected: %s", lineno, exc)
                store.rejected += 1
                continue
            if rec.domain in store.records:
                logger.warning("duplicate enrichment for %s at line %d; last record wins", rec.domain, lineno)
                store.duplicate_warnings += 1
            store.records[rec.domain] = rec
    return store


def enrich(
    domain: str, store: EnrichmentStore, resolver: Resolver | None = None
) -> EnrichmentRecord | None:
    hit = store.get(domain)
    if hit is not None or store.policy != RESOLVE or resolver is None:
        return hit
    try:
        ns, ips = resolver.resolve(domain)
        rec = EnrichmentRecord.create(domain, ips, ns)
    except (ResolverError, EnrichmentError) as exc:
        logger.warning("enrichment of %s failed: %s", domain, exc)
        return None
    except Exception:  # a resolver must never abort the pipeline
        logger.exception("resolver crashed on %s", domain)
        return None
    store.add(rec)
    return rec
