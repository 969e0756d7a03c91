"""Regenerate the bundled desk-scale corpus of labelled SPICE netlists.

Run from the repository root: ``python tools/make_desk_corpus.py``.
"""

from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "topobi" / "data" / "desk_corpus"


class Deck:
    def __init__(self, title):
        self.lines = [f"* {title}"]
        self.n = {}

    def _name(self, letter):
        self.n[letter] = self.n.get(letter, 0) + 1
        return f"{letter}{self.n[letter]}"

    def nmos(self, d, g, s, b="0"):
        self.lines.append(f"{self._name('M')} {d} {g} {s} {b} nch W=2u L=0.18u")
        return self

    def pmos(self, d, g, s, b="vdd"):
        self.lines.append(f"{self._name('M')} {d} {g} {s} {b} pch W=4u L=0.18u")
        return self

    def npn(self, c, b, e):
        self.lines.append(f"{self._name('Q')} {c} {b} {e} qnpn")
        return self

    def r(self, a, b, v="10k"):
        self.lines.append(f"{self._name('R')} {a} {b} {v}")
        return self

    def c(self, a, b, v="1p"):
        self.lines.append(f"{self._name('C')} {a} {b} {v}")
        return self

    def l(self, a, b, v="1n"):
        self.lines.append(f"{self._name('L')} {a} {b} {v}")
        return self

    def d(self, p, n):
        self.lines.append(f"{self._name('D')} {p} {n} dmod")
        return self

    def text(self):
        return "\n".join(self.lines + [".end"]) + "\n"


def ota5t(k, inp="vin1", inn="vin2", out="vout1", tail_bias="vin3", pin_in=False):
    if not pin_in:
        k.nmos("x1", inp, "tail").nmos(out, inn, "tail").nmos("tail", tail_bias, "0")
        k.pmos("x1", "x1", "vdd").pmos(out, "x1", "vdd")
    else:
        k.pmos("x1", inp, "tail").pmos(out, inn, "tail").pmos("tail", tail_bias, "vdd")
        k.nmos("x1", "x1", "0").nmos(out, "x1", "0")
    return k


def build():
    decks = {}

    def add(kind, name, deck):
        decks[f"{kind}_{name}"] = (kind, deck)

    # OpAmp
    add("OpAmp", "ota5t_n", ota5t(Deck("5T OTA nmos input")))
    add("OpAmp", "ota5t_p", ota5t(Deck("5T OTA pmos input"), pin_in=True))
    k = Deck("two-stage miller")
    ota5t(k, out="o1")
    k.pmos("vout1", "o1", "vdd").nmos("vout1", "vin3", "0").c("o1", "vout1")
    add("OpAmp", "two_stage", k)
    k = Deck("two-stage with nulling resistor")
    ota5t(k, out="o1")
    k.pmos("vout1", "o1", "vdd").nmos("vout1", "vin3", "0").r("o1", "z", "2k").c("z", "vout1")
    add("OpAmp", "two_stage_rz", k)
    k = Deck("telescopic")
    k.nmos("a", "vin1", "tail").nmos("b", "vin2", "tail").nmos("tail", "vin3", "0")
    k.nmos("x1", "vin4", "a").nmos("vout1", "vin4", "b")
    k.pmos("x1", "x1", "vdd").pmos("vout1", "x1", "vdd")
    add("OpAmp", "telescopic", k)
    k = Deck("folded cascode")
    k.nmos("fa", "vin1", "tail").nmos("fb", "vin2", "tail").nmos("tail", "vin3", "0")
    k.pmos("fa", "vin4", "vdd").pmos("fb", "vin4", "vdd")
    k.pmos("m", "bp", "fa").pmos("vout1", "bp", "fb").r("vdd", "bp").r("bp", "0")
    k.nmos("m", "m", "0").nmos("vout1", "m", "0")
    add("OpAmp", "folded_cascode", k)

    # Mirror
    k = Deck("simple nmos mirror")
    k.r("vdd", "ref").nmos("ref", "ref", "0").nmos("vout1", "ref", "0")
    add("Mirror", "nmos_simple", k)
    k = Deck("simple pmos mirror")
    k.r("ref", "0").pmos("ref", "ref", "vdd").pmos("vout1", "ref", "vdd")
    add("Mirror", "pmos_simple", k)
    k = Deck("cascode mirror")
    k.r("vdd", "ref").nmos("ref", "ref", "a").nmos("a", "a", "0").nmos("vout1", "ref", "b").nmos("b", "a", "0")
    add("Mirror", "cascode", k)
    k = Deck("wilson mirror")
    k.r("vdd", "ref").nmos("ref", "x", "0").nmos("x", "x", "0").nmos("vout1", "ref", "x")
    add("Mirror", "wilson", k)
    k = Deck("two-output mirror")
    k.r("vdd", "ref").nmos("ref", "ref", "0").nmos("vout1", "ref", "0").nmos("vout2", "ref", "0")
    add("Mirror", "two_output", k)
    k = Deck("bjt mirror")
    k.r("vdd", "ref").npn("ref", "ref", "0").npn("vout1", "ref", "0")
    add("Mirror", "bjt", k)

    # Comparator
    k = Deck("two-stage comparator")
    ota5t(k, out="o1")
    k.pmos("o2", "o1", "vdd").nmos("o2", "vin3", "0").pmos("vout1", "o2", "vdd").nmos("vout1", "o2", "0")
    add("Comparator", "two_stage", k)
    k = Deck("strongarm latch")
    k.nmos("tail", "vin3", "0").nmos("p", "vin1", "tail").nmos("q", "vin2", "tail")
    k.nmos("vout1", "vout2", "p").nmos("vout2", "vout1", "q")
    k.pmos("vout1", "vout2", "vdd").pmos("vout2", "vout1", "vdd")
    k.pmos("vout1", "vin3", "vdd").pmos("vout2", "vin3", "vdd")
    add("Comparator", "strongarm", k)
    k = Deck("latched comparator")
    k.nmos("a", "vin1", "tail").nmos("b", "vin2", "tail").nmos("tail", "vin3", "0")
    k.pmos("a", "b", "vdd").pmos("b", "a", "vdd").pmos("vout1", "a", "vdd").nmos("vout1", "a", "0")
    add("Comparator", "latched", k)
    k = Deck("hysteresis comparator")
    ota5t(k, out="o1")
    k.r("o1", "vout1", "100k").pmos("vout1", "o1", "vdd").nmos("vout1", "o1", "0")
    add("Comparator", "hysteresis", k)

    # Mixer
    k = Deck("gilbert cell")
    k.r("vdd", "vout1").r("vdd", "vout2")
    k.nmos("vout1", "vin1", "a").nmos("vout2", "vin2", "a").nmos("vout2", "vin1", "b").nmos("vout1", "vin2", "b")
    k.nmos("a", "vin3", "t").nmos("b", "vin4", "t").nmos("t", "bias", "0").r("vdd", "bias", "50k").c("bias", "0")
    add("Mixer", "gilbert", k)
    k = Deck("single balanced mixer")
    k.r("vdd", "vout1").r("vdd", "vout2").nmos("vout1", "vin1", "a").nmos("vout2", "vin2", "a").nmos("a", "vin3", "0")
    add("Mixer", "single_balanced", k)
    k = Deck("passive mixer")
    k.c("vin1", "x").nmos("x", "vin2", "vout1").nmos("x", "vin3", "vout2").c("vout1", "0").c("vout2", "0").r("x", "0", "50")
    add("Mixer", "passive", k)
    k = Deck("inductor loaded mixer")
    k.l("vdd", "vout1").l("vdd", "vout2").nmos("vout1", "vin1", "a").nmos("vout2", "vin2", "a").nmos("a", "vin3", "0")
    k.c("vout1", "vout2")
    add("Mixer", "inductor_load", k)

    # LDO
    for i, (div, cl) in enumerate([(True, True), (True, False), (False, True)]):
        k = Deck(f"ldo variant {i}")
        k.nmos("x1", "vin1", "tail").nmos("g", "fb", "tail").nmos("tail", "vin2", "0")
        k.pmos("x1", "x1", "vdd").pmos("g", "x1", "vdd").pmos("vout1", "g", "vdd")
        if div:
            k.r("vout1", "fb").r("fb", "0")
        else:
            k.r("vout1", "fb", "0").r("fb", "0", "50k").c("fb", "vout1")
        if cl:
            k.c("vout1", "0", "1n")
        add("LDO", f"v{i}", k)
    k = Deck("ldo nmos pass")
    ota5t(k, inp="vin1", inn="fb", out="g", tail_bias="vin2")
    k.nmos("vdd", "g", "vout1").r("vout1", "fb").r("fb", "0").c("vout1", "0", "1n")
    add("LDO", "nmos_pass", k)

    # Oscillator
    for stages in (3, 5):
        k = Deck(f"{stages}-stage ring")
        nodes = [f"n{i}" for i in range(stages - 1)] + ["vout1"]
        for i in range(stages):
            a, b = nodes[i - 1], nodes[i]
            k.pmos(b, a, "vdd").nmos(b, a, "0")
        add("Oscillator", f"ring{stages}", k)
    k = Deck("lc cross-coupled")
    k.l("vdd", "vout1").l("vdd", "vout2").c("vout1", "vout2").nmos("vout1", "vout2", "t").nmos("vout2", "vout1", "t").nmos("t", "vin1", "0")
    add("Oscillator", "lc_xcoupled", k)
    k = Deck("current starved ring")
    nodes = ["n0", "n1", "vout1"]
    for i in range(3):
        a, b = nodes[i - 1], nodes[i]
        k.pmos(b, a, f"p{i}").nmos(b, a, f"s{i}").pmos(f"p{i}", "vin2", "vdd").nmos(f"s{i}", "vin1", "0")
    add("Oscillator", "starved_ring", k)

    # Filter
    k = Deck("rc lowpass 2nd order")
    k.r("vin1", "a").c("a", "0").r("a", "vout1").c("vout1", "0")
    add("Filter", "rc2", k)
    k = Deck("rlc bandpass")
    k.r("vin1", "a", "1k").l("a", "vout1").c("vout1", "0").r("vout1", "0", "50k")
    add("Filter", "rlc", k)
    k = Deck("gm-c lowpass")
    ota5t(k, inp="vin1", inn="vout1", out="vout1", tail_bias="vin2")
    k.c("vout1", "0")
    add("Filter", "gmc", k)
    k = Deck("sallen key")
    k.r("vin1", "a").r("a", "b").c("a", "vout1").c("b", "0")
    ota5t(k, inp="b", inn="vout1", out="vout1", tail_bias="vin2")
    add("Filter", "sallen_key", k)

    # BGR
    k = Deck("bandgap brokaw-like")
    k.pmos("a", "a", "vdd").pmos("b", "a", "vdd").pmos("vout1", "a", "vdd")
    k.npn("a", "b", "e1").npn("b", "b", "0").r("e1", "0", "2k")
    k.r("vout1", "e3", "20k").npn("e3", "e3", "0")
    add("BGR", "brokaw", k)
    k = Deck("bandgap with diodes")
    k.pmos("a", "g", "vdd").pmos("b", "g", "vdd").pmos("vout1", "g", "vdd")
    k.d("a", "0").r("b", "x", "5k").d("x", "0").d("x", "0")
    ota5t(k, inp="a", inn="b", out="g", tail_bias="vin1")
    k.r("vout1", "y", "30k").d("y", "0")
    add("BGR", "diode_opamp", k)
    k = Deck("bandgap npn pair")
    k.r("vdd", "a", "20k").r("vdd", "b", "20k").npn("a", "vout1", "0").npn("b", "vout1", "e").r("e", "0", "1k")
    k.pmos("vout1", "b", "vdd").r("vout1", "0", "100k")
    add("BGR", "npn_pair", k)
    k = Deck("beta multiplier")
    k.pmos("a", "a", "vdd").pmos("b", "a", "vdd").nmos("a", "b", "s").nmos("b", "b", "0").r("s", "0", "5k")
    k.pmos("vout1", "a", "vdd").r("vout1", "q").npn("q", "q", "0")
    add("BGR", "beta_multiplier", k)

    # PowerAmp
    k = Deck("class A with choke")
    k.l("vdd", "d").nmos("d", "vin1", "0").c("d", "vout1").r("vout1", "0", "50")
    add("PowerAmp", "class_a", k)
    k = Deck("cascode pa")
    k.l("vdd", "d").nmos("d", "vin2", "m").nmos("m", "vin1", "0").c("d", "vout1").l("vout1", "0")
    add("PowerAmp", "cascode", k)
    k = Deck("class E")
    k.l("vdd", "d", "10n").nmos("d", "vin1", "0").c("d", "0").c("d", "x").l("x", "vout1").r("vout1", "0", "50")
    add("PowerAmp", "class_e", k)
    k = Deck("push-pull")
    k.pmos("vout1", "vin1", "vdd").nmos("vout1", "vin1", "0").c("vout1", "0", "10p").r("vout1", "0", "50")
    add("PowerAmp", "push_pull", k)

    # VoltageRegulator
    k = Deck("diode shunt")
    k.r("vdd", "vout1", "1k").d("vout1", "a").d("a", "0").c("vout1", "0")
    add("VoltageRegulator", "diode_shunt", k)
    k = Deck("emitter follower regulator")
    k.r("vdd", "b", "5k").d("b", "x").d("x", "0").npn("vdd", "b", "vout1").r("vout1", "0", "1k")
    add("VoltageRegulator", "emitter_follower", k)
    k = Deck("source follower regulator")
    k.r("vdd", "g", "20k").nmos("g", "g", "m").nmos("m", "m", "0").nmos("vdd", "g", "vout1").c("vout1", "0")
    add("VoltageRegulator", "source_follower", k)

    # PowerConverter
    k = Deck("buck")
    k.nmos("vdd", "vin1", "sw", "sw").d("0", "sw").l("sw", "vout1", "10u").c("vout1", "0", "10u").r("vout1", "0", "10")
    add("PowerConverter", "buck", k)
    k = Deck("boost")
    k.l("vdd", "sw", "10u").nmos("sw", "vin1", "0").d("sw", "vout1").c("vout1", "0", "10u").r("vout1", "0", "100")
    add("PowerConverter", "boost", k)
    k = Deck("synchronous buck")
    k.pmos("sw", "vin1", "vdd").nmos("sw", "vin2", "0").l("sw", "vout1", "10u").c("vout1", "0", "10u")
    add("PowerConverter", "sync_buck", k)
    k = Deck("charge pump doubler")
    k.nmos("vdd", "vin1", "a").c("a", "b").nmos("b", "vin2", "0").pmos("b", "vin1", "vdd").d("a", "vout1").c("vout1", "0")
    add("PowerConverter", "doubler", k)

    # PLL
    k = Deck("charge pump with loop filter")
    k.pmos("up", "vin1", "vdd").pmos("vout1", "vin3", "up").nmos("vout1", "vin2", "dn").nmos("dn", "vin4", "0")
    k.r("vout1", "z").c("z", "0").c("vout1", "0")
    add("PLL", "charge_pump", k)
    k = Deck("vco with varactor tank")
    k.l("vdd", "vout1").l("vdd", "vout2").nmos("vout1", "vout2", "t").nmos("vout2", "vout1", "t").nmos("t", "vin1", "0")
    k.d("vin2", "vout1").d("vin2", "vout2")
    add("PLL", "lc_vco", k)
    k = Deck("phase detector xor")
    k.nmos("x", "vin1", "0").nmos("x", "vin2", "0").pmos("x", "vin1", "p").pmos("p", "vin2", "vdd")
    k.r("x", "vout1").c("vout1", "0")
    add("PLL", "pd_filter", k)

    # SwitchedCap
    k = Deck("sc integrator")
    k.nmos("a", "vin2", "vin1").c("a", "b").nmos("b", "vin3", "m").c("m", "vout1")
    ota5t(k, inp="vin4", inn="m", out="vout1", tail_bias="vin4")
    k.nmos("a", "vin3", "0").nmos("b", "vin2", "0")
    add("SwitchedCap", "integrator", k)
    k = Deck("sample and hold")
    k.nmos("vout1", "vin2", "vin1").pmos("vout1", "vin3", "vin1").c("vout1", "0")
    add("SwitchedCap", "sample_hold", k)
    k = Deck("sc resistor")
    k.nmos("a", "vin2", "vin1").nmos("vout1", "vin3", "a").c("a", "0").c("vout1", "0")
    add("SwitchedCap", "sc_resistor", k)

    # DataConverter
    k = Deck("r-2r dac 2 bit")
    k.r("vout1", "n1").r("n1", "0", "20k").r("vout1", "s1", "20k").r("n1", "s0", "20k")
    k.nmos("s1", "vin1", "0").pmos("s1", "vin1", "vdd").nmos("s0", "vin2", "0").pmos("s0", "vin2", "vdd")
    add("DataConverter", "r2r", k)
    k = Deck("flash slice")
    k.r("vdd", "t1").r("t1", "t0").r("t0", "0")
    ota5t(k, inp="vin1", inn="t1", out="vout1", tail_bias="vin2")
    ota5t(k, inp="vin1", inn="t0", out="vout2", tail_bias="vin2")
    add("DataConverter", "flash", k)
    k = Deck("capacitive dac")
    k.c("vout1", "a", "2p").c("vout1", "b").pmos("a", "vin1", "vdd").nmos("a", "vin1", "0").pmos("b", "vin2", "vdd").nmos("b", "vin2", "0")
    k.nmos("vout1", "vin3", "0")
    add("DataConverter", "cdac", k)

    # General
    k = Deck("cmos inverter")
    k.pmos("vout1", "vin1", "vdd").nmos("vout1", "vin1", "0")
    add("General", "inverter", k)
    k = Deck("common source")
    k.r("vdd", "vout1").nmos("vout1", "vin1", "0")
    add("General", "common_source", k)
    k = Deck("source follower")
    k.nmos("vdd", "vin1", "vout1").nmos("vout1", "vin2", "0")
    add("General", "source_follower", k)
    k = Deck("cascode stage")
    k.r("vdd", "vout1").nmos("vout1", "vin2", "x").nmos("x", "vin1", "0")
    add("General", "cascode", k)
    k = Deck("nand2")
    k.pmos("vout1", "vin1", "vdd").pmos("vout1", "vin2", "vdd").nmos("vout1", "vin1", "x").nmos("x", "vin2", "0")
    add("General", "nand2", k)
    k = Deck("resistor divider buffer")
    k.r("vdd", "m").r("m", "0").nmos("vdd", "m", "vout1").r("vout1", "0")
    add("General", "divider_buffer", k)
    return decks


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.sp"):
        old.unlink()
    rows = []
    for name, (kind, deck) in sorted(build().items()):
        (OUT / f"{name}.sp").write_text(deck.text())
        rows.append(f"{name}.sp\t{kind}")
    (OUT / "manifest.tsv").write_text("# path\tcircuit_type\n" + "\n".join(rows) + "\n")
    print(f"wrote {len(rows)} netlists to {OUT}")


if __name__ == "__main__":
    main()
