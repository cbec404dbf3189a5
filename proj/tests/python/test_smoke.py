import os
import pathlib

import pytest

import venkman

CORPUS = pathlib.Path(os.environ.get("VENKMAN_CORPUS_DIR", pathlib.Path(__file__).parents[2] / "corpus"))


def test_presets():
    assert venkman.presets() == ["baseline", "align", "align+cfi", "+sfi-store", "+fence", "+sfi-load"]


def test_assemble_round_trip():
    word = venkman.assemble("clrlo r4, r4, 5")
    assert venkman.disassemble(word) == "clrlo r4, r4, 5"
    assert venkman.assemble("nop") == 0
    with pytest.raises(venkman.VenkmanError):
        venkman.assemble("frob r1")


def test_transform_verify_run():
    src = (CORPUS / "fib.s").read_text()
    out = venkman.transform(src, "+sfi-load")
    assert out.image[:4] == b"VKM1"
    assert out.stats["code_bytes"] % 32 == 0
    assert venkman.verify(out)["verdict"] == "pass"
    base = venkman.transform(src, "baseline")
    assert venkman.verify(base)["verdict"] == "pass"
    assert venkman.verify(base.image, out)["verdict"] == "fail"
    inputs = {"regs": {"r3": 10}}
    assert venkman.run(out, inputs)["regs"] == venkman.run(base, inputs)["regs"]


def test_mutated_image_fails():
    out = venkman.transform(venkman.attack_program(), "+fence")
    image = bytearray(out.image)
    fence = venkman.assemble("fence").to_bytes(4, "little")
    at = image.index(fence, 24)
    image[at : at + 4] = bytes(4)
    report = venkman.verify(bytes(image), out)
    assert report["verdict"] == "fail"
    assert {v["rule"] for v in report["violations"]} == {"R6"}
    with pytest.raises(venkman.VenkmanError):
        venkman.verify(b"junk", out)


def test_attack():
    cfg = {"spec_window": 32, "secret": "Hi there"}
    leaked = venkman.attack("baseline", cfg)
    assert leaked["leaked"]
    assert bytes.fromhex(leaked["recovered_hex"]) == b"Hi there"
    safe = venkman.attack("defended", cfg)
    assert not safe["leaked"]
    assert safe["verified"]


def test_report():
    rep = venkman.report(CORPUS, run_attack=False)
    assert len(rep["programs"]) == len(list(CORPUS.glob("*.s")))
    assert "align" in rep["geomean"]
