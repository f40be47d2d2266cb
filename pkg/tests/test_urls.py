import random
import re

import numpy as np
import pytest

from oracles import elbow_oracle
from phishgraph.urls import (
    BASE_FEATURE_NAMES, PublicSuffixList, TokenVocabulary, UrlParseError, elbow_cutoff,
    feature_matrix, feature_names, lexical_features, manifest_hash, parse_url, tokenize,
)


def test_anatomy_basic():
    a = parse_url("http://www.example.com/a/b?x=1")
    assert (a.scheme, a.subdomain, a.sld, a.tld) == ("http", "www", "example", "com")
    assert a.path_segments == ("a", "b")
    assert a.query_tokens == ("x", "1")
    assert a.registered_domain == "example.com"


def test_multi_label_suffix():
    a = parse_url("https://example.co.uk")
    assert (a.sld, a.tld, a.subdomain) == ("example", "co.uk", "")


def test_private_suffix():
    a = parse_url("https://login-paypal.web.app/x")
    assert (a.sld, a.tld) == ("login-paypal", "web.app")


@pytest.mark.parametrize("bad", ["not a url", "", "   ", "http://", "justaword"])
def test_unparseable(bad):
    with pytest.raises(UrlParseError):
        parse_url(bad)


def test_ip_host():
    a = parse_url("http://1.2.3.4/x")
    assert a.is_ip and a.registered_domain == "1.2.3.4" and a.tld == ""
    assert tokenize(a) == ["1", "2", "3", "4", "x"]


def test_implicit_scheme():
    a = parse_url("example.com/login")
    assert a.implicit_scheme and a.scheme == "http" and a.sld == "example"


def test_host_lowercased_path_not():
    a = parse_url("HTTP://WWW.Example.COM/Path")
    assert a.host == "www.example.com" and a.path == "/Path"
    assert tokenize(a)[-1] == "path"


@pytest.mark.parametrize("url", [
    "http://www.example.com/a/b?x=1",
    "https://user@shop.example.co.uk:8080/p/q.html?a=1&b=2#frag",
    "example.org/x",
    "http://1.2.3.4/login.php",
    "https://a.b.c.example.com/",
])
def test_unparse_round_trip(url):
    assert parse_url(url).unparse() == url


def test_psl_wildcard_and_exception():
    psl = PublicSuffixList(["// comment", "com", "*.ck", "!www.ck"])
    assert psl.suffix_length(["a", "b", "ck"]) == 2
    assert psl.suffix_length(["www", "ck"]) == 1
    assert psl.suffix_length(["x", "example", "com"]) == 1
    assert psl.suffix_length(["x", "unknowntld"]) == 1


def test_tokenize_examples():
    assert tokenize(parse_url("http://www.example.com/a/b?x=1")) == ["www", "example", "com", "a", "b", "x", "1"]
    assert tokenize(parse_url("http://example.com")) == ["example", "com"]
    assert tokenize(parse_url("http://example.com/a%20b")) == ["example", "com", "a", "20", "b"]


@pytest.mark.parametrize("url", [
    "http://www.example.com/a/b?x=1",
    "http://example.com/a%20b",
    "https://login.secure-bank.com/signin/v2_id?continue=https%3A%2F%2Fx&n=3#top",
    "http://shop.example.com/cart/item-42.html",
    "http://example.com/%7Euser/a%2fb%zz",
])
def test_tokenize_matches_character_class_oracle(url):
    # host labels stay whole; everything after the host is alphanumeric runs, with
    # each percent escape contributing its two hex digits as a separate token
    rest = url.split("://", 1)[1]
    host, tail = rest.split("/", 1) if "/" in rest else (rest, "")
    chars = []
    i = 0
    while i < len(tail):
        if tail[i] == "%" and re.fullmatch(r"[0-9A-Fa-f]{2}", tail[i + 1:i + 3]):
            chars.append(" " + tail[i + 1:i + 3] + " ")
            i += 3
        else:
            chars.append(tail[i])
            i += 1
    oracle = host.lower().split(".") + [t.lower() for t in re.findall(r"[A-Za-z0-9]+", "".join(chars))]
    assert tokenize(parse_url(url)) == oracle


def test_multi_label_tld_kept_whole():
    assert tokenize(parse_url("https://shop.example.co.uk/x")) == ["shop", "example", "co.uk", "x"]


@pytest.mark.parametrize("freqs,expected", [
    ([5, 5, 5, 5], 0),
    ([10, 8, 6, 4, 2], 0),
    ([100, 50, 10, 9, 8, 7], None),
])
def test_elbow_examples(freqs, expected):
    want = elbow_oracle(freqs) if expected is None else expected
    assert elbow_cutoff(freqs) == want


def test_elbow_hand_value():
    # cross products |(f_i - 100) * 5 + 93 i| = 0, 157, 264, 188, 112, 0
    assert elbow_cutoff([100, 50, 10, 9, 8, 7]) == 2


def test_elbow_random_curves_match_oracle():
    rng = random.Random(5)
    for _ in range(300):
        n = rng.randint(2, 30)
        freqs = sorted((rng.randint(0, 60) for _ in range(n)), reverse=True)
        assert elbow_cutoff(freqs) == elbow_oracle(freqs), freqs


@pytest.mark.parametrize("bad", [[3], [1, 2], [-1, -2]])
def test_elbow_rejects(bad):
    with pytest.raises(ValueError):
        elbow_cutoff(bad)


def test_vocabulary_prunes_above_cutoff(tmp_path):
    docs = [["com", "www", "login"], ["com", "www", "shop"], ["com", "a"], ["com", "www"], ["com", "b"]]
    v = TokenVocabulary.build(docs)
    freqs = sorted(v.counts.values(), reverse=True)
    assert v.cutoff_frequency == freqs[elbow_cutoff(freqs)]
    assert v.kept == {t for t, c in v.counts.items() if c <= v.cutoff_frequency}
    assert "com" not in v and "login" in v
    v.save(tmp_path / "v.csv")
    back = TokenVocabulary.load(tmp_path / "v.csv")
    assert back.counts == v.counts and back.kept == v.kept
    assert back.cutoff_frequency == v.cutoff_frequency


def test_vocabulary_empty():
    v = TokenVocabulary.build([])
    assert v.kept == frozenset() and v.cutoff_frequency == 0


def feature(url, name, flag=False):
    f = lexical_features(url, include_domain_contains_address=flag)
    return f.values[f.names.index(name)]


def test_feature_examples():
    assert feature("http://1.2.3.4/x", "host_is_ip") == 1
    assert feature("https://example.com", "is_https") == 1
    assert feature("https://example.com", "n_digits") == 0
    url = "http://a-b.example.com/p?q=1"
    assert feature(url, "n_hyphen") == url.count("-") == 1
    assert feature(url, "n_equals") == url.count("=") == 1
    assert feature(url, "n_subdomain_labels") == 1


def test_character_counts_against_raw_string():
    urls = ["http://x_y.a-b.example.com/p/q?r=1&s=2@t", "https://example.org/a/b/c.html", "http://9.8.7.6/"]
    for url in urls:
        for name, ch in [("n_dot", "."), ("n_slash", "/"), ("n_ampersand", "&"), ("n_at", "@"), ("n_underscore", "_")]:
            assert feature(url, name) == url.count(ch)
        assert feature(url, "url_length") == len(url)
        assert feature(url, "n_digits") == sum(c.isdigit() for c in url)


def test_domain_contains_address_flag():
    assert feature_names(True)[-1] == "domain_contains_address"
    assert len(feature_names(False)) == len(BASE_FEATURE_NAMES)
    assert feature("http://1.2.3.4/x", "domain_contains_address", True) == 1
    assert feature("http://example.com", "domain_contains_address", True) == 0
    assert manifest_hash(feature_names(True)) != manifest_hash(feature_names(False))


def test_feature_matrix_rows():
    urls = ["http://a.com", "https://b.org/x?y=1"]
    X = feature_matrix(urls)
    assert X.shape == (2, len(BASE_FEATURE_NAMES))
    np.testing.assert_array_equal(X[1], lexical_features(urls[1]).values)
