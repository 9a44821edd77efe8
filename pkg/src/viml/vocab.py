"""Default music tag vocabulary.

Mirrors the tagger this pipeline is built around: 41 instrument tags,
20 genre tags, and 28 mood tags. The three lists are disjoint so a flat
comma-separated tag list is unambiguous.
"""

# fmt: off
GENRES: tuple[str, ...] = (
    "ambient", "blues", "classical", "country", "dance",
    "disco", "electronic", "folk", "funk", "hip hop",
    "house", "indie", "jazz", "latin", "metal",
    "pop", "punk", "reggae", "rock", "soul",
)

MOODS: tuple[str, ...] = (
    "aggressive", "calm", "cheerful", "dark", "dramatic",
    "dreamy", "dynamic", "energetic", "epic", "frantic",
    "fun", "gentle", "gloomy", "groovy", "happy",
    "haunting", "hopeful", "intense", "melancholic", "mellow",
    "mysterious", "nostalgic", "peaceful", "playful", "romantic",
    "sad", "tense", "uplifting",
)

INSTRUMENTS: tuple[str, ...] = (
    "accordion", "acoustic guitar", "banjo", "bass guitar", "bells",
    "brass", "cello", "clarinet", "classical guitar", "double bass",
    "drum machine", "drums", "electric guitar", "electronic drumset", "fiddle",
    "flute", "french horn", "hammond organ", "harmonica", "harp",
    "keyboard", "mandolin", "marimba", "oboe", "organ",
    "percussion", "piano", "saxophone", "sitar", "strings",
    "synth bass", "synthesizer", "synthesizer keyboard", "tambourine", "trombone",
    "trumpet", "tuba", "ukulele", "vibraphone", "violin",
    "vocals",
)
# fmt: on

DEFAULT_VOCABULARY: dict[str, tuple[str, ...]] = {
    "genre": GENRES,
    "mood": MOODS,
    "instrument": INSTRUMENTS,
}
