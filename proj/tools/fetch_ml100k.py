#!/usr/bin/env python3
"""Materialize the MovieLens-100K files (u.data, u.item, u.user) into a directory.

Tries the GroupLens archive first. When that host is unreachable, the same
data is rebuilt from the copy shipped inside the pytorch-widedeep wheel,
re-emitted in the original file grammars (tab/pipe separated, ISO-8859-1).
"""
import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
GENRES = ["unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
          "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
          "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western"]


def from_grouplens(out: pathlib.Path) -> bool:
    try:
        with urllib.request.urlopen(GROUPLENS_URL, timeout=20) as resp:
            blob = resp.read()
    except Exception as exc:  # noqa: BLE001
        print(f"grouplens unreachable: {exc}", file=sys.stderr)
        return False
    with zipfile.ZipFile(io.BytesIO(blob)) as z:
        for name in ("u.data", "u.item", "u.user", "u.genre"):
            (out / name).write_bytes(z.read(f"ml-100k/{name}"))
    return True


def from_widedeep(out: pathlib.Path) -> None:
    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                        "pytorch-widedeep==1.7.0", "-d", tmp, "-q"], check=True)
        wheel = next(pathlib.Path(tmp).glob("pytorch_widedeep-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            def load(kind):
                path = f"pytorch_widedeep/datasets/data/MovieLens100k_{kind}.parquet.brotli"
                return pd.read_parquet(io.BytesIO(z.read(path)))
            data, items, users = load("data"), load("items"), load("users")

    def cell(v):
        return "" if v is None or (isinstance(v, float) and v != v) else str(v)

    with open(out / "u.data", "w", encoding="latin-1", newline="\n") as f:
        for r in data.itertuples(index=False):
            f.write(f"{r.user_id}\t{r.movie_id}\t{r.rating}\t{r.timestamp}\n")
    with open(out / "u.item", "w", encoding="latin-1", newline="\n") as f:
        for r in items.itertuples(index=False):
            row = list(r)
            fields = [cell(x) for x in row[:5]] + [str(int(x)) for x in row[5:]]
            f.write("|".join(fields) + "\n")
    with open(out / "u.user", "w", encoding="latin-1", newline="\n") as f:
        for r in users.itertuples(index=False):
            f.write(f"{r.user_id}|{r.age}|{r.gender}|{r.occupation}|{r.zip_code}\n")
    with open(out / "u.genre", "w", encoding="latin-1", newline="\n") as f:
        for i, g in enumerate(GENRES):
            f.write(f"{g}|{i}\n")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="data/ml-100k")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not from_grouplens(out):
        from_widedeep(out)
    print(f"wrote MovieLens-100K to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
