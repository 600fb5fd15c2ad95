from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

# A word is a tuple of nonzero signed generator indices: i is x_i, -i is x_i^{-1}.
Word = Tuple[int, ...]


def check_word(word: Word, rank: int) -> None:
    for letter in word:
        if letter == 0 or abs(letter) > rank:
            raise ValueError(f"letter {letter} out of range for rank {rank}")


class ClosureBlock(BaseModel):
    """
    Marks words[offset : offset + 2**len(base)] as the subset closure of `base`.

    Positions follow binary counting over the base tuple: bit j of the local
    index selects base[j].
    """

    model_config = ConfigDict(frozen=True)

    offset: int = Field(ge=0)
    base: Tuple[Tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return 1 << len(self.base)


class WordSet(BaseModel):
    """Ordered multiset of words over a free group of declared rank."""

    model_config = ConfigDict(frozen=True)

    rank: int = Field(gt=0)
    words: Tuple[Tuple[int, ...], ...]
    label: str = ""
    closure: Optional[Tuple[ClosureBlock, ...]] = None

    @model_validator(mode="after")
    def _validate_words(self) -> "WordSet":
        if not self.words:
            raise ValueError("a word set needs at least one word")
        for word in self.words:
            check_word(word, self.rank)
        if self.closure:
            end = 0
            for block in self.closure:
                if block.offset < end or block.offset + block.size > len(self.words):
                    raise ValueError(f"closure block at offset {block.offset} does not fit")
                for word in block.base:
                    check_word(word, self.rank)
                end = block.offset + block.size
        return self

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def basis(cls, k: int, label: str = "basis") -> "WordSet":
        return cls(rank=k, words=tuple((i,) for i in range(1, k + 1)), label=label)
