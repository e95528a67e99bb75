#!/usr/bin/env python3
# Copyright 2026 The hbproxy Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Generates the case files under cases/.

Ring cases: nblocks blocks laid out along x, block b's east face cut to
block b+1's west face (closing the ring). A quarter of the blocks get
a reversed north-north "wake" cut, body 0 sits on the south faces of the
first quarter and body 1 on the south faces of the third quarter.
"""

import argparse
import pathlib


def ring_case(name, nblocks, ni, nj, nharms, iterations, dtau, h=0.1):
    out = [f"# {name}: {nblocks} blocks of {ni}x{nj}, nharms={nharms}",
           "[case]", f"nharms = {nharms}", "npde = 4", f"iterations = {iterations}",
           f"dtau = {dtau}", "omega = 1.0", "nbody = 2", ""]
    q = nblocks // 4
    for b in range(nblocks):
        out += [f"[block {b}]", f"ni = {ni}", f"nj = {nj}",
                f"origin = {b * ni * h:.6g} 0.0", f"h = {h}"]
        if b < q:
            out.append("body = south 0")
        elif 2 * q <= b < 3 * q:
            out.append("body = south 1")
        out.append("")
    cut = 0
    for b in range(nblocks):
        out += [f"[cut {cut}]", f"a = {b} east 1 {nj}",
                f"b = {(b + 1) % nblocks} west 1 {nj}", "orientation = forward", ""]
        cut += 1
    for k in range(q):
        out += [f"[cut {cut}]", f"a = {q + k} north 1 {ni}",
                f"b = {nblocks - 1 - k} north 1 {ni}", "orientation = reversed", ""]
        cut += 1
    return "\n".join(out)


def pair_case(name, ni, nj, nharms, iterations, dtau, body=True, h=0.1):
    out = [f"# {name}: two blocks of {ni}x{nj} joined east-west",
           "[case]", f"nharms = {nharms}", "npde = 4", f"iterations = {iterations}",
           f"dtau = {dtau}", "omega = 1.0", f"nbody = {1 if body else 0}", ""]
    out += ["[block 0]", f"ni = {ni}", f"nj = {nj}", "origin = 0.0 0.0", f"h = {h}"]
    if body:
        out.append("body = south 0")
    out += ["", "[block 1]", f"ni = {ni}", f"nj = {nj}", f"origin = {ni * h:.6g} 0.0", f"h = {h}", ""]
    out += ["[cut 0]", f"a = 0 east 1 {nj}", f"b = 1 west 1 {nj}", "orientation = forward", ""]
    return "\n".join(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "cases"))
    args = ap.parse_args()
    d = pathlib.Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    cases = {
        "tc-tiny.case": pair_case("tc-tiny", 4, 4, 1, 10, 0.02),
        "tc-remote.case": pair_case("tc-remote", 2, 2500, 1, 1, 0.02, body=False),
        "tc1-mini.case": ring_case("tc1-mini", 32, 32, 32, 7, 100, 0.02),
        "tc2-mini.case": ring_case("tc2-mini", 64, 32, 32, 4, 100, 0.02),
        # Full-size shapes for reference runs; not exercised by the test suite.
        "tc1.case": ring_case("tc1", 512, 16, 32, 15, 100, 0.02),
        "tc2.case": ring_case("tc2", 2048, 32, 64, 8, 100, 0.02),
    }
    for name, text in cases.items():
        (d / name).write_text(text)


if __name__ == "__main__":
    main()
