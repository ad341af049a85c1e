#!/usr/bin/env python3
"""Regenerate the default prompt corpus.

Two modes:

  make_prompts.py --instructions
      Print the instruction text to paste into a chat LLM when you want a
      freshly written corpus. Save its answer, one prompt per line, and run
      it through `charfac train` once; the loader rejects any malformed line
      with its line number.

  make_prompts.py --out data/prompts.txt [--count 1000] [--seed 0]
      Deterministically compose the frozen default corpus shipped in data/.
      Re-running with the same arguments reproduces the file byte for byte.
"""

import argparse
import hashlib
import random
import sys

INSTRUCTIONS = """\
Write {count} short text-to-image prompts about one person, referred to by the
literal marker {{ID}}. Spread them evenly over five categories: facial
expressions, decorations (clothing, jewellery, hats, glasses), actions,
attributes (hair, age, style, body pose) and backgrounds (places, weather,
light). Vary where {{ID}} appears: sometimes first, sometimes in the middle,
sometimes near the end. Every prompt must contain {{ID}} exactly once, must be
a single line under 25 words, and must not name any real person.
Output format: one prompt per line, prefixed by its category and a TAB
character, e.g. "actions<TAB>{{ID}} riding a bicycle through a park".
"""

EXPRESSIONS = ["smiling", "laughing", "frowning", "crying", "surprised", "angry", "thoughtful", "sleepy",
               "winking", "shouting", "grinning", "serious", "shy", "bored", "excited", "nervous", "calm",
               "confused", "proud", "sad"]
DECORATIONS = ["wearing a red hat", "wearing sunglasses", "wearing a blue scarf", "wearing a leather jacket",
               "wearing a wool sweater", "wearing a white shirt", "wearing a black suit", "wearing a golden necklace",
               "wearing round glasses", "wearing a baseball cap", "wearing a raincoat", "wearing a green hoodie",
               "wearing headphones", "wearing a crown", "wearing earrings", "wearing a denim jacket",
               "wearing a striped tie", "wearing a chef hat", "wearing a space suit", "wearing a wedding dress"]
ACTIONS = ["reading a book", "riding a bicycle", "playing the guitar", "drinking coffee", "cooking dinner",
           "painting a canvas", "running", "dancing", "swimming", "taking a photo", "playing chess",
           "walking a dog", "writing a letter", "climbing a rock", "holding an umbrella", "eating a sandwich",
           "talking on the phone", "playing the piano", "skateboarding", "watering plants"]
ATTRIBUTES = ["with curly hair", "with short hair", "with long hair", "with a beard", "with freckles",
              "with blue eyes", "with a ponytail", "with grey hair", "with a tattoo", "with braided hair",
              "as a child", "as an old person", "as a teenager", "in side view", "in profile",
              "sitting on a chair", "standing tall", "with crossed arms", "with a big smile", "looking up"]
BACKGROUNDS = ["on the beach", "in the snow", "in a forest", "in a city street at night", "in a library",
               "in a kitchen", "on a mountain", "in the rain", "at sunset", "in a garden", "in a cafe",
               "on a boat", "in the desert", "in a classroom", "under cherry blossoms", "in front of the eiffel tower",
               "in a subway station", "in a field of flowers", "in a museum", "on a rooftop"]
STYLES = ["a photo of", "a portrait of", "a close up photo of", "a painting of", "a picture of",
          "an image of", "a selfie of", "a sketch of"]

SHAPES = {
    "expressions": [
        "{style} {ID} {expr}",
        "{ID} {expr} {bg}",
        "a {expr} {ID}",
        "{style} a {expr} {ID} {bg}",
        "{ID} looking {expr}",
    ],
    "decorations": [
        "{style} {ID} {deco}",
        "{ID} {deco} {bg}",
        "{style} {ID} {deco} and {deco2}",
        "{deco} , {ID} {bg}",
        "{ID} {deco}",
    ],
    "actions": [
        "{ID} {act}",
        "{style} {ID} {act} {bg}",
        "{act} {bg} , {ID}",
        "{ID} {act} while {deco}",
        "{style} {ID} {act}",
    ],
    "attributes": [
        "{style} {ID} {attr}",
        "{ID} {attr} {bg}",
        "{style} {ID} {attr} , {expr}",
        "{attr} , {ID} {act}",
        "{ID} {attr}",
    ],
    "backgrounds": [
        "{ID} {bg}",
        "{style} {ID} {bg}",
        "{bg} , {ID} {act}",
        "{ID} standing {bg}",
        "{style} {ID} {deco} {bg}",
    ],
}


def compose(count, seed):
    rng = random.Random(seed)
    cats = list(SHAPES)
    per_cat = [count // len(cats) + (1 if i < count % len(cats) else 0) for i in range(len(cats))]
    lines, seen = [], set()
    for cat, n in zip(cats, per_cat):
        made = 0
        while made < n:
            deco, deco2 = rng.sample(DECORATIONS, 2)
            fields = {
                "ID": "{ID}",
                "style": rng.choice(STYLES),
                "expr": rng.choice(EXPRESSIONS),
                "deco": deco,
                "deco2": deco2.replace("wearing ", ""),
                "act": rng.choice(ACTIONS),
                "attr": rng.choice(ATTRIBUTES),
                "bg": rng.choice(BACKGROUNDS),
            }
            text = rng.choice(SHAPES[cat]).format(**fields)
            text = " ".join(text.split())
            if text in seen:
                continue
            seen.add(text)
            lines.append(f"{cat}\t{text}")
            made += 1
    return lines


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instructions", action="store_true", help="print LLM instructions and exit")
    ap.add_argument("--out", help="output corpus path")
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if args.instructions:
        print(INSTRUCTIONS.format(count=args.count))
        return 0
    if not args.out:
        ap.error("--out is required unless --instructions is given")
    lines = compose(args.count, args.seed)
    body = "".join(line + "\n" for line in lines)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(body)
    print(f"{len(lines)} prompts, sha256 {hashlib.sha256(body.encode()).hexdigest()}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
