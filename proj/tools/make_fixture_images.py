"""Writes the JPEG fixtures used by the codec tests (needs Pillow)."""
import pathlib

from PIL import Image

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "images"


def gradient(w, h):
    img = Image.new("RGB", (w, h))
    img.putdata([(x * 255 // (w - 1), y * 255 // (h - 1), 128) for y in range(h) for x in range(w)])
    return img


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    img = gradient(48, 32)
    img.save(OUT / "gradient_baseline.jpg", quality=95)
    img.save(OUT / "gradient_progressive.jpg", quality=95, progressive=True)
    img.convert("L").save(OUT / "gradient_gray.jpg", quality=95)
    img.convert("CMYK").save(OUT / "gradient_cmyk.jpg", quality=95)


if __name__ == "__main__":
    main()
