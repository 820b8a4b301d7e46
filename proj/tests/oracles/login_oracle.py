"""Weighted-identifier login scores for the login fixture corpus."""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from htmlwalk import walk  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1] / "fixtures"
CORPUS = ROOT / "login_corpus"

KEYWORDS = [
    "username", "password", "login", "signin", "sign-in", "log in", "log-in", "authenticate",
    "credentials", "account", "identity", "user", "email", "e-mail", "passcode",
    "customer number", "pin", "secret code", "authentication code", "security code",
    "passphrase", "account number", "membership number", "social security number",
    "authorization code", "login code", "secure login", "unique identifier", "login id",
    "login name", "login details", "login information", "login credentials", "login data",
    "login token", "login key", "userid", "forgot", "Log in", "Login", "Email", "Username",
    "Sign in", "signed in", "Phone", "phone",
]
URL_KEYWORDS = ["signin", "signup", "login", "log-in", "sign-in", "sign-up"]
FIELD_MATCHES = {
    "name": {"username", "userid", "email"},
    "type": {"email", "password"},
    "placeholder": {"username", "email", "password"},
}
KEYWORD_WEIGHT, KEYWORD_CAP = 10, 30
URL_WEIGHT, SUBMIT_WEIGHT, FIELD_WEIGHT, THRESHOLD = 30, 15, 60, 75


def first(attrs, name):
    for k, v in attrs:
        if k == name:
            return v.strip(" \t\n\r\f").lower()
    return None


def score(html, url):
    w = walk(html)
    haystack = "\n".join(w.texts + [v for _, attrs in w.starts for _, v in attrs])
    keywords = sum(KEYWORD_WEIGHT for k in KEYWORDS if k in haystack)
    total = min(keywords, KEYWORD_CAP)
    if any(k in url for k in URL_KEYWORDS):
        total += URL_WEIGHT

    submit = False
    fields = 0
    forms = 0
    for ev in w.events:
        kind, tag = ev[0], ev[1]
        if kind == "end":
            if tag == "form":
                forms = max(0, forms - 1)
            continue
        attrs = ev[2]
        if tag == "form" and kind == "start":
            forms += 1
        elif tag == "button":
            t = first(attrs, "type")
            if t == "submit" or (t is None and forms > 0):
                submit = True
        elif tag == "input":
            if first(attrs, "type") == "submit":
                submit = True
            if any(first(attrs, a) in vals for a, vals in FIELD_MATCHES.items()):
                fields += 1
    total += SUBMIT_WEIGHT if submit else 0
    total += FIELD_WEIGHT * fields
    return total


def main():
    manifest = json.loads((CORPUS / "manifest.json").read_text())
    out = []
    for item in manifest:
        html = (CORPUS / item["file"]).read_text(encoding="utf-8")
        s = score(html, item["url"])
        out.append({"file": item["file"], "score": s, "is_login": s > THRESHOLD})
    (ROOT / "golden" / "login_scores.json").write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
