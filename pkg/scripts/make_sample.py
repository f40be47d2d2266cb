"""Generate the bundled synthetic URL corpus and its frozen enrichment file.

The corpus mimics the structure seen in public benign/phishing feeds:

* benign sites sit on mainstream hosting providers and use ordinary path
  vocabulary; most contribute one or two URLs, a few popular ones many
  more; a minority have long tracking queries, login/account paths or
  hyphenated hosts that look suspicious lexically;
* phishing URLs come in campaigns that reuse a kit (path tokens), a small
  pool of hosting IPs and nameservers across many throwaway domains that
  rarely carry more than two URLs each; a sizeable share of them are
  lexically clean (compromised small-business sites, short https paths) so
  string features alone cannot separate them;
* most phishing lives on free hosting platforms and abused shared hosts next
  to benign sites, and compromised sites keep their own ordinary hosting, so
  IPs and nameservers are far from pure; only a minority of campaigns use
  dedicated infrastructure;
* account-related words (login, verify, billing, ...) also appear on benign
  sites with user accounts;
* a few domains have no enrichment record at all.

Usage: python scripts/make_sample.py [--n 3000] [--seed 7] [--out data/sample]
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

WORDS = """
apple river stone cloud green north south maple cedar harbor summit valley bright swift
silver golden ocean forest garden market studio craft bakery coffee travel health clinic
dental school academy library museum theater garden hotel resort auto motors parts repair
plumbing electric solar energy water fresh organic farm kitchen pizza grill sushi bistro
fitness yoga sport outdoor camping bike cycle running tennis golf music guitar piano radio
media press news daily weekly journal review guide world city county local family home
house realty estate legal law office finance capital credit advisor insure design print
photo video film games toys books comics art gallery fashion shoes boutique jewelry beauty
salon spa pets vet animal garden tools hardware supply lumber paint glass metal steel
""".split()

PAGE_WORDS = """
about contact products services blog news article category tag archive events team careers
faq support help docs documentation pricing features gallery portfolio menu order shop cart
collections item detail reviews press media resources download guides tutorials community
forum topics post page search results calendar schedule locations store map policy terms
privacy shipping returns account profile settings dashboard
""".split()

BRANDS = """
paypal apple microsoft office365 outlook netflix amazon chase wellsfargo bankofamerica
dhl fedex usps docusign dropbox adobe instagram facebook coinbase binance steam
""".split()

KIT_WORDS = """
secure verify update confirm signin login account billing unlock restore validate auth
session recovery webscr cmd wallet payment invoice suspend limited review notice alert
""".split()

# kit vocabulary that legitimate sites with user accounts share
ACCOUNT_WORDS = """
secure verify update confirm signin login account billing auth session recovery wallet
payment invoice
""".split()

SYLLABLES = "ka lo ven tor mi sa ru pe zan qui dor bel fa nix tro ga vel os ur eth".split()

CHEAP_TLDS = ["xyz", "top", "info", "online", "site", "live", "club", "icu", "buzz", "shop"]
NORMAL_TLDS = ["com"] * 8 + ["org", "net", "co.uk", "de", "io", "com.au", "ca"]
FREE_HOSTS = ["web.app", "netlify.app", "github.io", "herokuapp.com", "firebaseapp.com"]


def pseudo_word(rng: random.Random, n: int = 3) -> str:
    return "".join(rng.choice(SYLLABLES) for _ in range(n))


def make_ip(rng: random.Random, prefix: tuple[int, int, int]) -> str:
    return f"{prefix[0]}.{prefix[1]}.{prefix[2]}.{rng.randint(2, 254)}"


class World:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.enrichment: dict[str, dict] = {}
        self.used_domains: set[str] = set()
        self.providers = []
        for i in range(14):
            name = pseudo_word(rng, 2) + rng.choice(["host", "cloud", "web", "net"])
            prefix = (rng.randint(20, 220), rng.randint(0, 255), rng.randint(0, 255))
            pool = sorted({make_ip(rng, prefix) for _ in range(rng.randint(15, 40))})
            ns = [f"ns{j}.{name}.net" for j in (1, 2)]
            self.providers.append({"name": name, "ips": pool, "ns": ns, "abused": i < 3})
        self.bulletproof = []
        for _ in range(7):
            name = pseudo_word(rng, 2) + rng.choice(["dns", "srv", "hosting"])
            prefix = (rng.randint(40, 200), rng.randint(0, 255), rng.randint(0, 255))
            pool = sorted({make_ip(rng, prefix) for _ in range(rng.randint(6, 14))})
            ns = [f"ns{j}.{name}.{rng.choice(['ru', 'su', 'biz', 'cc'])}" for j in (1, 2)]
            self.bulletproof.append({"name": name, "ips": pool, "ns": ns})
        self.platforms = {}
        for host in FREE_HOSTS:
            prefix = (rng.randint(30, 200), rng.randint(0, 255), rng.randint(0, 255))
            self.platforms[host] = {
                "ips": sorted({make_ip(rng, prefix) for _ in range(4)}),
                "ns": [f"ns{j}.{host.split('.')[0]}-dns.com" for j in (1, 2)],
            }

    def fresh_domain(self, make) -> str:
        for _ in range(1000):
            d = make()
            if d not in self.used_domains:
                self.used_domains.add(d)
                return d
        raise RuntimeError("domain space exhausted")

    def register(self, domain: str, ips, ns, missing_rate: float = 0.04) -> None:
        if self.rng.random() < missing_rate:
            return
        self.enrichment[domain] = {"domain": domain, "ips": list(ips), "nameservers": list(ns)}


def benign_site(world: World):
    rng = world.rng
    style = rng.random()
    if style < 0.08:
        host = rng.choice(FREE_HOSTS)
        domain = world.fresh_domain(lambda: f"{rng.choice(WORDS)}{rng.choice(['', '-'])}{pseudo_word(rng, 2)}.{host}")
        plat = world.platforms[host]
        world.register(domain, rng.sample(plat["ips"], 2), plat["ns"])
    else:
        tld = rng.choice(NORMAL_TLDS)
        if rng.random() < 0.5:
            make = lambda: f"{rng.choice(WORDS)}{rng.choice(WORDS)}.{tld}"
        elif rng.random() < 0.5:
            make = lambda: f"{rng.choice(WORDS)}-{rng.choice(WORDS)}.{tld}"
        else:
            make = lambda: f"{pseudo_word(rng, rng.randint(2, 3))}.{tld}"
        domain = world.fresh_domain(make)
        prov = rng.choice(world.providers[:10] if rng.random() < 0.8 else world.providers)
        world.register(domain, rng.sample(prov["ips"], rng.randint(1, 2)), prov["ns"])
    site_words = rng.sample(PAGE_WORDS, 8) + [pseudo_word(rng, 2) for _ in range(4)]
    if rng.random() < 0.3:
        site_words += rng.sample(ACCOUNT_WORDS, rng.randint(1, 3))
    return {"domain": domain, "words": site_words, "messy": rng.random() < 0.18}


def benign_url(world: World, site: dict) -> str:
    rng = world.rng
    scheme = "https" if rng.random() < 0.75 else "http"
    sub = rng.choice(["www", "www", "www", "", "blog", "shop", "docs", "m"])
    host = f"{sub}.{site['domain']}" if sub and not any(site["domain"].endswith(h) for h in FREE_HOSTS) else site["domain"]
    depth = rng.choice([0, 1, 1, 2, 2, 3])
    parts = [rng.choice(site["words"]) for _ in range(depth)]
    if rng.random() < 0.3 and parts:
        parts[-1] += rng.choice([".html", ".php", f"-{rng.randint(1, 400)}", ""])
    url = f"{scheme}://{host}/" + "/".join(parts)
    if site["messy"] and rng.random() < 0.7:
        kind = rng.random()
        if kind < 0.4:
            url = (f"{scheme}://accounts-{rng.choice(['login', 'secure', 'auth'])}.{site['domain']}"
                   f"/{rng.choice(['signin', 'login', 'account'])}?continue=https%3A%2F%2F{site['domain']}"
                   f"%2F{rng.choice(site['words'])}&session={rng.randint(10**6, 10**9)}")
        elif kind < 0.8:
            url += (f"?utm_source={rng.choice(['newsletter', 'fb', 'tw'])}&utm_medium=email"
                    f"&utm_campaign={rng.choice(site['words'])}-{rng.randint(2015, 2024)}"
                    f"&id={rng.randint(10**5, 10**8)}&ref={pseudo_word(rng, 2)}")
        else:
            url += f"/{rng.choice(['verify', 'update', 'confirm'])}-{rng.choice(['email', 'account', 'order'])}?token={rng.randint(10**8, 10**12)}"
    elif rng.random() < 0.15:
        url += f"?{rng.choice(['page', 'q', 'id', 'sort'])}={rng.randint(1, 200)}"
    return url


def phishing_campaign(world: World, size: int):
    rng = world.rng
    brand = rng.choice(BRANDS)
    kit_tokens = rng.sample(KIT_WORDS, 3) + [pseudo_word(rng, 2), pseudo_word(rng, 3)]
    r = rng.random()
    if r < 0.2:
        infra = rng.choice(world.bulletproof)
        ips = rng.sample(infra["ips"], min(len(infra["ips"]), rng.randint(2, 4)))
        ns = infra["ns"]
        platform = None
    elif r < 0.65:
        prov = rng.choice([p for p in world.providers if p["abused"]] + world.providers[:10])
        ips = rng.sample(prov["ips"], rng.randint(2, 3))
        ns = prov["ns"]
        platform = None
    else:
        platform = rng.choice(FREE_HOSTS)
        ips = world.platforms[platform]["ips"]
        ns = world.platforms[platform]["ns"]

    domains = []
    for _ in range(max(2, int(size / rng.uniform(1.2, 2.0)))):
        style = rng.random()
        if platform is not None:
            d = world.fresh_domain(lambda: f"{brand}-{rng.choice(kit_tokens[:3])}{rng.randint(1, 999)}.{platform}")
            clean = False
        elif style < 0.35:
            d = world.fresh_domain(lambda: f"{rng.choice(WORDS)}{rng.choice(WORDS)}.{rng.choice(NORMAL_TLDS)}")
            clean = True  # compromised ordinary site
        elif style < 0.7:
            d = world.fresh_domain(lambda: f"{brand}-{rng.choice(kit_tokens[:3])}-{pseudo_word(rng, 2)}.{rng.choice(CHEAP_TLDS)}")
            clean = False
        elif style < 0.88 or all(ip in world.used_domains for ip in ips):
            d = world.fresh_domain(lambda: f"{pseudo_word(rng, rng.randint(3, 5))}{rng.randint(0, 99)}.{rng.choice(CHEAP_TLDS)}")
            clean = False
        else:
            d = world.fresh_domain(lambda: rng.choice(ips))
            clean = False
        if clean:
            # a compromised site stays where its owner hosts it
            prov = rng.choice(world.providers)
            world.register(d, rng.sample(prov["ips"], rng.randint(1, 2)), prov["ns"])
        else:
            world.register(d, rng.sample(ips, min(len(ips), rng.randint(1, 2))), [] if d[0].isdigit() else ns)
        domains.append((d, clean))
    return {"brand": brand, "kit": kit_tokens, "domains": domains}


def phishing_url(world: World, camp: dict) -> str:
    rng = world.rng
    domain, clean = rng.choice(camp["domains"])
    kit = camp["kit"]
    if clean and rng.random() < 0.75:
        scheme = "https"
        host = rng.choice([f"www.{domain}", domain])
        path = "/".join([rng.choice(PAGE_WORDS), kit[3]] + ([rng.choice(kit[:3])] if rng.random() < 0.4 else []))
        return f"{scheme}://{host}/{path}"
    scheme = "https" if rng.random() < 0.45 else "http"
    host = domain
    if not domain[0].isdigit() and rng.random() < 0.4:
        host = f"{rng.choice([camp['brand'], 'secure', 'login', 'www'])}.{domain}"
    segs = rng.sample(kit, rng.randint(2, 4))
    if rng.random() < 0.3:
        segs.insert(0, rng.choice(["wp-content", "wp-includes", "plugins", "images"]))
    url = f"{scheme}://{host}/" + "/".join(segs)
    if rng.random() < 0.5:
        url += rng.choice([".php", ".html", "/index.php"])
    if rng.random() < 0.4:
        url += f"?{rng.choice(['cmd', 'session', 'id', 'email'])}={rng.randint(10**4, 10**10)}"
        if rng.random() < 0.4:
            url += f"&{rng.choice(['dispatch', 'ref', 'token'])}={pseudo_word(rng, 3)}{rng.randint(0, 999)}"
    return url


def generate(n: int, seed: int, phish_share: float = 0.35):
    rng = random.Random(seed)
    world = World(rng)
    n_phish = int(round(n * phish_share))
    n_benign = n - n_phish

    urls: dict[str, int] = {}
    sites = [benign_site(world) for _ in range(max(20, n_benign // 2))]
    weights = [1.0 / (i + 1) ** 0.5 for i in range(len(sites))]
    while sum(1 for v in urls.values() if v == 0) < n_benign:
        site = rng.choices(sites, weights)[0]
        u = benign_url(world, site)
        urls.setdefault(u, 0)

    campaigns = []
    remaining = n_phish
    while remaining > 0:
        size = min(remaining, rng.randint(6, 40))
        campaigns.append((phishing_campaign(world, size), size))
        remaining -= size
    for camp, size in campaigns:
        made = 0
        tries = 0
        while made < size and tries < size * 50:
            tries += 1
            u = phishing_url(world, camp)
            if u not in urls:
                urls[u] = 1
                made += 1

    rows = list(urls.items())
    rng.shuffle(rows)
    return rows, [world.enrichment[d] for d in sorted(world.enrichment)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="data/sample")
    args = ap.parse_args()
    rows, enrichment = generate(args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    import csv

    with open(f"{out}_urls.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "label"])
        w.writerows(rows)
    with open(f"{out}_enrichment.jsonl", "w", encoding="utf-8") as fh:
        for rec in enrichment:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    print(f"wrote {len(rows)} urls, {len(enrichment)} enrichment records to {out}_*")


if __name__ == "__main__":
    main()
