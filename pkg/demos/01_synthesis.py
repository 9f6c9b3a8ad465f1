"""Build a convolutional dictionary, place atoms, and round-trip the files.

Run from anywhere: python3 demos/01_synthesis.py
Artifacts land in demos/out/.
"""

import pathlib

import numpy as np

from cscforge import (
    ConvDictionary,
    Rng,
    export_atom_grid,
    geometry_for_representation,
    random_dictionary,
    read_csct,
    synthesize,
    write_csct,
    write_image,
)

OUT = pathlib.Path(__file__).parent / "out"


def main():
    OUT.mkdir(exist_ok=True)
    rng = Rng(7)

    D = random_dictionary(m=16, n=4, c=1, stride=2, padding=1, rng=rng)
    geo = geometry_for_representation(D, 8, 8)
    print(f"dictionary: {D.atom_count} atoms, {D.atom_size}x{D.atom_size}, "
          f"stride {D.stride}, padding {D.padding}")
    print(f"an 8x8 representation grid synthesizes a "
          f"{geo.out_height}x{geo.out_width} image")
    print(f"  (H_out = (8-1)*{D.stride} + {D.atom_size} - 2*{D.padding})")

    # one unit coefficient per quadrant: the image is four shifted atoms
    gamma = np.zeros((8, 8, 16), np.float32)
    for pos, atom in [((1, 1), 0), ((1, 6), 3), ((6, 1), 7), ((6, 6), 12)]:
        gamma[pos[0], pos[1], atom] = 255.0
    image = synthesize(D, gamma)
    print(f"placed 4 unit needles, image range "
          f"[{image.min():.1f}, {image.max():.1f}]")

    write_csct(OUT / "code.csct", gamma)
    write_image(OUT / "four_atoms.pgm", np.abs(image) * 4)
    back = read_csct(OUT / "code.csct")
    print(f"CSCT round trip bit-identical: {np.array_equal(back, gamma)}")

    grid = export_atom_grid(D, cols=4)
    write_image(OUT / "atoms.pgm", grid)
    print(f"atom grid {grid.shape[0]}x{grid.shape[1]} written to {OUT}/atoms.pgm")


if __name__ == "__main__":
    main()
