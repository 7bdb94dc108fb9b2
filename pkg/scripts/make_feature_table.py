"""Write data/hayes_features.csv: articulation features for the 39 ARPABET phonemes.

Feature inventory after Hayes (2009), with a `diphthong` feature added for
the ARPABET diphthongs.  ``0`` marks a feature that is not specified for the
phoneme (e.g. [anterior] for non-coronals).
"""
import csv
import sys
from pathlib import Path

FEATURES = [
    "syllabic", "consonantal", "approximant", "sonorant", "continuant",
    "delayed_release", "nasal", "voice", "spread_glottis", "constricted_glottis",
    "labial", "round", "labiodental", "coronal", "anterior", "distributed",
    "strident", "lateral", "dorsal", "high", "low", "front", "back", "tense",
    "diphthong",
]

BASE_CONS = dict(syllabic="-", consonantal="+", approximant="-", sonorant="-",
                 nasal="-", voice="-", spread_glottis="-", constricted_glottis="-",
                 labial="-", round="0", labiodental="0", coronal="-", anterior="0",
                 distributed="0", strident="0", lateral="-", dorsal="-", high="0",
                 low="0", front="0", back="0", tense="0", diphthong="-")
STOP = dict(continuant="-", delayed_release="-")
FRIC = dict(continuant="+", delayed_release="+")
AFFR = dict(continuant="-", delayed_release="+")
NASAL = dict(sonorant="+", nasal="+", voice="+", continuant="-", delayed_release="0")
LABIAL = dict(labial="+", round="-", labiodental="-")
LABIODENTAL = dict(labial="+", round="-", labiodental="+")
ALVEOLAR = dict(coronal="+", anterior="+", distributed="-", strident="-")
DENTAL = dict(coronal="+", anterior="+", distributed="+", strident="-")
POSTALV = dict(coronal="+", anterior="-", distributed="+", strident="+")
VELAR = dict(dorsal="+", high="+", low="-", front="-", back="+")
VOICED = dict(voice="+")

BASE_VOWEL = dict(syllabic="+", consonantal="-", approximant="+", sonorant="+",
                  continuant="+", delayed_release="0", nasal="-", voice="+",
                  spread_glottis="-", constricted_glottis="-", labial="-", round="-",
                  labiodental="0", coronal="-", anterior="0", distributed="0",
                  strident="0", lateral="-", dorsal="+", diphthong="-")
ROUND = dict(labial="+", round="+", labiodental="-")


def vowel(high, low, front, back, tense, *extra):
    row = dict(BASE_VOWEL, high=high, low=low, front=front, back=back, tense=tense)
    for e in extra:
        row.update(e)
    return row


def cons(*parts):
    row = dict(BASE_CONS)
    for p in parts:
        row.update(p)
    return row


DIPH = dict(diphthong="+")
RHOTIC = dict(coronal="+", anterior="-", distributed="-")

PHONEMES = {
    "P": cons(STOP, LABIAL),
    "B": cons(STOP, LABIAL, VOICED),
    "T": cons(STOP, ALVEOLAR),
    "D": cons(STOP, ALVEOLAR, VOICED),
    "K": cons(STOP, VELAR),
    "G": cons(STOP, VELAR, VOICED),
    "CH": cons(AFFR, POSTALV),
    "JH": cons(AFFR, POSTALV, VOICED),
    "F": cons(FRIC, LABIODENTAL, dict(strident="+")),
    "V": cons(FRIC, LABIODENTAL, dict(strident="+"), VOICED),
    "TH": cons(FRIC, DENTAL),
    "DH": cons(FRIC, DENTAL, VOICED),
    "S": cons(FRIC, ALVEOLAR, dict(strident="+")),
    "Z": cons(FRIC, ALVEOLAR, dict(strident="+"), VOICED),
    "SH": cons(FRIC, POSTALV),
    "ZH": cons(FRIC, POSTALV, VOICED),
    "HH": cons(FRIC, dict(consonantal="-", delayed_release="0", spread_glottis="+")),
    "M": cons(NASAL, LABIAL),
    "N": cons(NASAL, ALVEOLAR),
    "NG": cons(NASAL, VELAR),
    "L": cons(ALVEOLAR, dict(sonorant="+", approximant="+", continuant="+",
                             delayed_release="0", voice="+", lateral="+")),
    "R": cons(RHOTIC, dict(consonantal="-", sonorant="+", approximant="+",
                           continuant="+", delayed_release="0", voice="+")),
    "W": cons(ROUND, VELAR, dict(consonantal="-", sonorant="+", approximant="+",
                                 continuant="+", delayed_release="0", voice="+")),
    "Y": cons(dict(consonantal="-", sonorant="+", approximant="+", continuant="+",
                   delayed_release="0", voice="+", dorsal="+", high="+", low="-",
                   front="+", back="-")),
    "IY": vowel("+", "-", "+", "-", "+"),
    "IH": vowel("+", "-", "+", "-", "-"),
    "EY": vowel("-", "-", "+", "-", "+", DIPH),
    "EH": vowel("-", "-", "+", "-", "-"),
    "AE": vowel("-", "+", "+", "-", "-"),
    "AA": vowel("-", "+", "-", "+", "+"),
    "AO": vowel("-", "-", "-", "+", "-", ROUND),
    "AH": vowel("-", "-", "-", "-", "-"),
    "UH": vowel("+", "-", "-", "+", "-", ROUND),
    "UW": vowel("+", "-", "-", "+", "+", ROUND),
    "OW": vowel("-", "-", "-", "+", "+", ROUND, DIPH),
    "ER": vowel("-", "-", "-", "-", "+", RHOTIC),
    "AY": vowel("-", "+", "+", "-", "+", DIPH),
    "AW": vowel("-", "+", "-", "+", "+", ROUND, DIPH),
    "OY": vowel("-", "-", "+", "-", "+", ROUND, DIPH),
}


def main(out):
    rows = {ph: tuple(spec[f] for f in FEATURES) for ph, spec in PHONEMES.items()}
    assert len(set(rows.values())) == len(rows), "feature rows must be distinct"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phoneme"] + FEATURES)
        for ph, vals in rows.items():
            w.writerow([ph, *vals])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         Path(__file__).resolve().parents[1] / "src/asrnoise/data/hayes_features.csv")
