#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from the Python unicodedata UCD.

Separator set: general categories P*, S*, Z* plus the ASCII control
whitespace (TAB..CR, NEL). Lowercase table: single-codepoint lowercase
mappings only (multi-codepoint special casings are left as identity).
"""
import sys
import unicodedata

MAX_CP = 0x110000


def gen_separator_ranges():
    ranges = []
    lo = None
    for cp in range(MAX_CP):
        cat = unicodedata.category(chr(cp))
        sep = cat[0] in "PSZ" or cp in (0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x85)
        if sep and lo is None:
            lo = cp
        elif not sep and lo is not None:
            ranges.append((lo, cp - 1))
            lo = None
    if lo is not None:
        ranges.append((lo, MAX_CP - 1))
    return ranges


def gen_lowercase_pairs():
    pairs = []
    for cp in range(MAX_CP):
        low = chr(cp).lower()
        if len(low) == 1 and ord(low) != cp:
            pairs.append((cp, ord(low)))
    return pairs


def main():
    seps = gen_separator_ranges()
    lows = gen_lowercase_pairs()
    out = sys.stdout
    out.write("// Generated by tools/gen_unicode_tables.py (UCD %s). Do not edit.\n"
              % unicodedata.unidata_version)
    out.write("// clang-format off\n")
    out.write("static constexpr uint32_t kSeparatorRanges[][2] = {\n")
    for i in range(0, len(seps), 6):
        row = ", ".join("{0x%X, 0x%X}" % r for r in seps[i:i + 6])
        out.write("    %s,\n" % row)
    out.write("};\n\n")
    out.write("static constexpr uint32_t kLowercasePairs[][2] = {\n")
    for i in range(0, len(lows), 6):
        row = ", ".join("{0x%X, 0x%X}" % p for p in lows[i:i + 6])
        out.write("    %s,\n" % row)
    out.write("};\n")
    out.write("// clang-format on\n")


if __name__ == "__main__":
    main()
