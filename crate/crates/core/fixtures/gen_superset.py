#!/usr/bin/env python3
"""Regenerates superset.xml, the reviewed requirement/testcase superset."""
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

RET = 'lp_modes has "retention"'
SHD = 'lp_modes has "shutdown"'
I4 = 'ahb_bursts has "incr4"'
I8 = 'ahb_bursts has "incr8"'

# (title, predicate, text)
HWRQS = [
    ("Single error detection on every read word", "ecc >= sed", "A single flipped bit in a stored word is flagged on read."),
    ("Single error correction", "ecc >= secded", "A single flipped bit is corrected and the original data returned."),
    ("Double error detection", "ecc == secded", "Two flipped bits are flagged as uncorrectable."),
    ("Double error correction", "ecc == dected", "Up to two flipped bits are corrected."),
    ("Triple error detection", "ecc == dected", "Three flipped bits are flagged as uncorrectable."),
    ("ECC status flag per beat", "ecc != none", "Every read beat carries an ok/corrected/uncorrectable flag."),
    ("Corrected-error counter", "ecc >= secded", "Corrections are counted."),
    ("Uncorrectable-error counter", "ecc >= sed", "Uncorrectable detections are counted."),
    ("Check-bit storage overhead", "ecc != none", "Check bits are stored alongside data in each word."),
    ("Raw storage without ECC", "ecc == none", "Without ECC the array returns the written data verbatim."),
    ("DECTED limited to narrow datapaths", "ecc == dected", "DECTED is offered at 8 and 16 data bits."),
    ("ECC on 32-bit words", "ecc >= sed && data_width == 32", "ECC protection holds for 32-bit words."),
    ("AHB single transfers", "true", "Single-beat reads and writes complete with OKAY."),
    ("INCR4 bursts", I4, "Four-beat incrementing bursts are supported."),
    ("INCR8 bursts", I8, "Eight-beat incrementing bursts are supported."),
    ("Out-of-range accesses answer ERROR", "true", "Any beat beyond the array answers ERROR without side effects."),
    ("Idle transfers complete with zero wait", "true", "IDLE transfers answer OKAY with no wait states."),
    ("Address map covers the configured depth", "true", "Every word in 0..addr_words is addressable."),
    ("Large array decode", "addr_words >= 4096", "Arrays of 4096 words or more decode correctly."),
    ("Byte-wide datapath", "data_width == 8", "8-bit data words."),
    ("Halfword datapath", "data_width == 16", "16-bit data words."),
    ("Word datapath", "data_width == 32", "32-bit data words."),
    ("Retention mode preserves contents", RET, "Contents survive a retention cycle."),
    ("Shutdown mode invalidates contents", SHD, "Contents read as the invalidation pattern after shutdown."),
    ("Access during low-power answers ERROR", f"{RET} || {SHD}", "Reads and writes in a low-power mode answer ERROR."),
    ("Unconfigured low-power requests rejected", "true", "Requests for a mode that is not configured are refused."),
    ("Always-on operation", f"!({RET}) && !({SHD})", "Without low-power modes the array is always accessible."),
    ("High-density SRAM latency", "tech == sram_hd", "Two cycles per beat for reads and writes."),
    ("High-speed SRAM latency", "tech == sram_hs", "One cycle per beat for reads and writes."),
    ("RRAM read latency", "tech == rram", "Three cycles per read beat."),
    ("RRAM write latency", "tech == rram", "Five cycles per write beat."),
    ("RRAM with ECC", "tech == rram && ecc >= sed", "RRAM arrays keep ECC protection."),
    ("Deterministic reset contents", "true", "After reset every word reads as zero."),
    ("Analog sense-amplifier margins", "tech == rram", "Sense margins meet the technology corner limits."),
    ("Power-domain isolation", SHD, "Outputs are isolated while the array is shut down."),
]

F, S = "formal", "simulation"
# (title, domain, predicate, verified hwrq numbers)
TCS = [
    ("ECC single-error detection proof", F, "ecc >= sed", [1]),
    ("Single-bit fault injection sweep", S, "ecc >= sed", [1]),
    ("ECC single-error correction proof", F, "ecc >= secded", [2]),
    ("Correctable fault injection sweep", S, "ecc >= secded", [2, 7]),
    ("ECC double-error detection proof", F, "ecc == secded", [3]),
    ("Double-bit fault sweep", S, "ecc == secded", [3]),
    ("ECC double-error correction proof", F, "ecc == dected", [4]),
    ("Double-bit correction fault sweep", S, "ecc == dected", [4]),
    ("ECC triple-error detection proof", F, "ecc == dected", [5]),
    ("Triple-bit fault sweep", S, "ecc == dected", [5]),
    ("ECC status flag proof", F, "ecc != none", [6]),
    ("Status flag random traffic", S, "ecc != none", [6]),
    ("Corrected counter fault sweep", S, "ecc >= secded", [7]),
    ("Uncorrectable counter fault sweep", S, "ecc >= sed", [8]),
    ("ECC check-bit layout proof", F, "ecc != none", [9]),
    ("Raw data integrity random traffic", S, "ecc == none", [10]),
    ("Raw storage fault visibility sweep", S, "ecc == none", [10]),
    ("ECC narrow-datapath DECTED proof", F, "ecc == dected", [11]),
    ("ECC 32-bit codeword proof", F, "ecc >= sed && data_width == 32", [12]),
    ("32-bit fault sweep", S, "ecc >= sed && data_width == 32", [12]),
    ("Single transfer decode check", F, "true", [13]),
    ("Single transfer random traffic", S, "true", [13, 18]),
    ("INCR4 burst sequencing", S, I4, [14]),
    ("INCR4 decode check", F, I4, [14]),
    ("INCR8 burst sequencing", S, I8, [15]),
    ("INCR8 decode check", F, I8, [15]),
    ("Out-of-range decode check", F, "true", [16]),
    ("Boundary random traffic", S, "true", [16]),
    ("Idle transfer decode check", F, "true", [17]),
    ("Address map decode check", F, "true", [18]),
    ("Large array random traffic", S, "addr_words >= 4096", [19]),
    ("Large array decode check", F, "addr_words >= 4096", [19]),
    ("Byte datapath random traffic", S, "data_width == 8", [20]),
    ("Halfword datapath random traffic", S, "data_width == 16", [21]),
    ("Word datapath random traffic", S, "data_width == 32", [22]),
    ("Mixed-length transfer random traffic", S, f"{I4} || {I8}", [14, 15]),
    ("Retention power cycle", S, RET, [23]),
    ("Retention entry and exit decode check", F, RET, [23, 25]),
    ("Shutdown power cycle", S, SHD, [24]),
    ("Shutdown decode check", F, SHD, [24, 25]),
    ("Low-power access power cycle", S, f"{RET} || {SHD}", [25]),
    ("Unconfigured mode request power cycle", S, "true", [26]),
    ("Always-on random traffic", S, f"!({RET}) && !({SHD})", [27]),
    ("Always-on decode check", F, f"!({RET}) && !({SHD})", [27]),
    ("High-density SRAM latency decode check", F, "tech == sram_hd", [28]),
    ("High-density SRAM random traffic", S, "tech == sram_hd", [28]),
    ("High-speed SRAM latency decode check", F, "tech == sram_hs", [29]),
    ("High-speed SRAM random traffic", S, "tech == sram_hs", [29]),
    ("RRAM read latency decode check", F, "tech == rram", [30]),
    ("RRAM read random traffic", S, "tech == rram", [30]),
    ("RRAM write latency decode check", F, "tech == rram", [31]),
    ("RRAM write burst sequencing", S, "tech == rram", [31]),
    ("RRAM ECC fault sweep", S, "tech == rram && ecc >= sed", [32]),
    ("RRAM ECC capability proof", F, "tech == rram && ecc >= sed", [32]),
    ("Reset contents random traffic", S, "true", [33]),
    ("Reset contents decode check", F, "true", [33]),
    ("Retention with ECC power cycle", S, f"{RET} && ecc >= secded", [23, 2]),
    ("Shutdown with ECC power cycle", S, f"{SHD} && ecc != none", [24, 6]),
    ("Long random traffic soak", S, "true", [13, 33]),
    ("Wide address burst sequencing", S, f"addr_words >= 4096 && ({I4} || {I8})", [19, 14, 15]),
    ("Multi-bit fault sweep", S, "ecc >= secded", [2, 3]),
    ("Bus error response decode check", F, "true", [16]),
    ("Halfword DECTED fault sweep", S, "ecc == dected && data_width == 16", [4, 21]),
    ("Technology latency random traffic", S, "true", [28, 29, 30]),
    ("Protocol burst decode check", F, f"{I4} || {I8}", [14, 15]),
]

WAIVERS = [
    ("Sense margins are signed off at silicon characterization", 34, "tech == rram"),
    ("Isolation is signed off with the power-intent flow", 35, SHD),
]

HISTORY = "draft,in_review,approved"


def item(out, id_, kind, title, text, pred, domain=None, target=None):
    attrs = f'id="{id_}" kind="{kind}" state="approved"'
    if domain:
        attrs += f' domain="{domain}"'
    if target:
        attrs += f' target="{target}"'
    attrs += f' history="{HISTORY}"'
    out.append(f"  <item {attrs}>")
    out.append(f"    <title>{escape(title)}</title>")
    out.append(f"    <text>{escape(text)}</text>")
    out.append(f"    <applicability>{escape(pred)}</applicability>")
    out.append("  </item>")


def main():
    hid = lambda n: f"HWRQ-{n:03d}"
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<rmt-store>"]
    for kind, n in (("hwrq", len(HWRQS)), ("testcase", len(TCS)), ("waiver", len(WAIVERS))):
        out.append(f'  <sequence kind="{kind}" next="{n + 1}"/>')
    for i, (title, pred, text) in enumerate(HWRQS, 1):
        item(out, hid(i), "hwrq", title, text, pred)
    for i, (title, dom, pred, _) in enumerate(TCS, 1):
        item(out, f"TC-{i:03d}", "testcase", title, f"Verifies: {title.lower()}.", pred, domain=dom)
    for i, (title, target, pred) in enumerate(WAIVERS, 1):
        item(out, f"WVR-{i:03d}", "waiver", title, "Out of scope for RTL verification.", pred, target=hid(target))
    rels = []
    for i, (_, _, _, hs) in enumerate(TCS, 1):
        rels += [(f"TC-{i:03d}", hid(h), "verifies") for h in hs]
    for i, (_, target, _) in enumerate(WAIVERS, 1):
        rels.append((f"WVR-{i:03d}", hid(target), "waives"))
    for f, t, k in sorted(rels):
        out.append(f'  <rel from="{f}" to="{t}" kind="{k}"/>')
    out.append("</rmt-store>")
    Path(__file__).with_name("superset.xml").write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
