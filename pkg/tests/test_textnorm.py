import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capecmatch.errors import FormatError, ParseError
from capecmatch.textnorm import (
    AcronymDictionary,
    default_normalizer,
    detect_acronyms,
    lemmatize_token,
    load_acronyms,
    load_lemma_table,
    load_stopwords,
    preprocess,
    strip_version_tokens,
)


# ---------------------------------------------------------------------------
# strip_version_tokens
# ---------------------------------------------------------------------------

def test_strip_dotted_version():
    assert (
        strip_version_tokens("huge IT gallery v1.1.5 for Joomla")
        == "huge IT gallery for Joomla"
    )


def test_strip_no_versions_unchanged():
    assert strip_version_tokens("no versions here") == "no versions here"


def test_strip_build_and_update_pairs():
    assert strip_version_tokens("Cisco 2700 build 4.2.1 update 3") == "Cisco 2700"


def test_strip_service_pack_and_v_number():
    assert strip_version_tokens("Windows 2000 sp1 and IIS v6") == "Windows 2000 and IIS"


def test_strip_keeps_bare_numbers():
    assert strip_version_tokens("Cisco 2700 appliance") == "Cisco 2700 appliance"


def test_strip_handles_punctuation_edges():
    assert strip_version_tokens("Foo (v1.2.3), bar 2.0.1.") == "Foo bar"


_WORDY = st.text(
    alphabet=st.sampled_from("abcdefgv123. "),
    min_size=0,
    max_size=60,
)


@given(_WORDY)
@settings(max_examples=200)
def test_strip_never_removes_plain_words(text):
    kept = set(strip_version_tokens(text).split())
    for word in text.split():
        letters = [c for c in word if c.isalpha()]
        # A removed token may contain letters only as a lone leading v or a
        # grammar keyword (sp/build/update); anything else must be kept.
        if letters and not (
            (word.lower().startswith("v") and len(letters) == 1)
            or word.lower().strip(".") in ("sp", "build", "update")
            or word.lower().lstrip("spbuildupdate").isdigit()
        ):
            assert word in kept


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def test_preprocess_name_field():
    assert preprocess("Try Common or Default Usernames and Passwords") == [
        "try",
        "common",
        "default",
        "username",
        "password",
    ]


def test_preprocess_empty():
    assert preprocess("") == []


def test_preprocess_punctuation_and_case():
    assert preprocess("Cross-Site Scripting (XSS)") == ["cross", "site", "scripting", "xss"]


def test_preprocess_drops_stopwords_after_lemmatization():
    # "thes" lemmatizes to the stop word "the" and must vanish.
    assert preprocess("thes") == []


@given(st.text(max_size=120))
@settings(max_examples=300)
def test_preprocess_idempotent(text):
    once = preprocess(text)
    again = preprocess(" ".join(once))
    assert once == again


def test_lemma_table_values_are_fixed_points():
    table = load_lemma_table()
    for form, lemma in table.items():
        assert lemmatize_token(lemma, table) == lemma, (form, lemma)


def test_lemmatize_suffix_fallback():
    table = load_lemma_table()
    assert lemmatize_token("vulnerabilities", table) == "vulnerability"
    assert lemmatize_token("attackers", table) == "attacker"
    assert lemmatize_token("scanning", table) == "scan"
    assert lemmatize_token("crafted", table) == "craft"
    assert lemmatize_token("hashes", table) == "hash"
    assert lemmatize_token("passes", table) == "pass"
    # Table entries beat the fallback.
    assert lemmatize_token("scripting", table) == "scripting"
    assert lemmatize_token("dos", table) == "dos"


def test_load_lemma_table_rejects_non_fixed_point(tmp_path):
    bad = tmp_path / "lemmas.tsv"
    bad.write_text("men\tman\nman\tpeoples\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_lemma_table(bad)


def test_load_stopwords_skips_comments(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("# comment\nthe\n\nand\n", encoding="utf-8")
    assert load_stopwords(path) == frozenset({"the", "and"})


# ---------------------------------------------------------------------------
# Acronym dictionary
# ---------------------------------------------------------------------------

def test_detect_acronyms_bundled_dictionary():
    tokens = preprocess("XSS and SQLi in huge IT gallery")
    found = detect_acronyms(tokens, load_acronyms())
    assert found == [("xss", "cross site scripting"), ("sqli", "sql injection")]


def test_detect_acronyms_expansion_side():
    dictionary = AcronymDictionary()
    dictionary.add("SQLi", "sql injection")
    tokens = preprocess("A sql injection issue in the login form")
    assert detect_acronyms(tokens, dictionary) == [("sqli", "sql injection")]


def test_detect_acronyms_nothing():
    tokens = preprocess("A completely benign kitchen appliance")
    assert detect_acronyms(tokens, load_acronyms()) == []


def test_detect_acronyms_case_insensitive():
    dictionary = AcronymDictionary()
    dictionary.add("XSS", "cross site scripting")
    for text in ("xss bug", "XSS bug", "Xss bug"):
        assert detect_acronyms(preprocess(text), dictionary) == [
            ("xss", "cross site scripting")
        ]


def test_acronym_lookup_case_insensitive():
    dictionary = AcronymDictionary()
    dictionary.add("XSS", "cross site scripting")
    assert dictionary.expansions("xss") == [("cross", "site", "scripting")]
    assert dictionary.expansions("XSS") == [("cross", "site", "scripting")]


def test_acronym_single_token_expansion_rejected():
    dictionary = AcronymDictionary()
    with pytest.raises(ValueError):
        dictionary.add("SQLI", "sqlinjection")
    dictionary.add("SQLI", "sqlinjection", single_token_ok=True)
    assert dictionary.expansions("SQLI") == [("sqlinjection",)]


def test_acronym_multiple_expansions_per_acronym():
    dictionary = AcronymDictionary()
    dictionary.add("CSRF", "cross site request forgery")
    dictionary.add("CSRF", "session riding attack")
    assert len(dictionary.expansions("CSRF")) == 2


def test_load_acronyms_bad_header(tmp_path):
    path = tmp_path / "acr.csv"
    path.write_text("short,long\nXSS,cross site scripting\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_acronyms(path)


def test_load_acronyms_row_error_has_line(tmp_path):
    path = tmp_path / "acr.csv"
    path.write_text("acronym,expansion\nXSS,scripting\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_acronyms(path)
    assert err.value.line == 2


def test_bundled_acronyms_load():
    dictionary = load_acronyms()
    assert len(dictionary) >= 40
    assert ("cross", "site", "scripting") in dictionary.expansions("XSS")


def test_default_normalizer_tokens_clean():
    tokens = default_normalizer().preprocess("Weird -- punctuation!! / and\ttabs")
    for token in tokens:
        assert token.isalnum() and token == token.lower()
