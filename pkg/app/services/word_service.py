import logging
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from app.core.exceptions import InvalidInputError
from app.models.group import Element, FiniteGroupBackend
from app.models.word import ClosureBlock, Word, WordSet
from app.schemas.words import ClosureBlockDocument, LengthStats, WordSetDocument

logger = logging.getLogger(__name__)


class WordService:
    """Free-group words: reduction, evaluation, word maps and (de)serialization."""

    def reduce(self, word: Sequence[int]) -> Word:
        stack: List[int] = []
        for letter in word:
            if stack and stack[-1] == -letter:
                stack.pop()
            else:
                stack.append(letter)
        return tuple(stack)

    def is_reduced(self, word: Sequence[int]) -> bool:
        return all(a != -b for a, b in zip(word, word[1:]))

    def inverse(self, word: Sequence[int]) -> Word:
        return tuple(-letter for letter in reversed(word))

    def concat(self, *words: Sequence[int]) -> Word:
        """Unreduced concatenation."""
        return tuple(letter for word in words for letter in word)

    def closure_products(self, base: Sequence[Sequence[int]]) -> List[Word]:
        """Ordered products of every subset of `base`; bit j of the position selects base[j]."""
        m = len(base)
        return [self.concat(*(base[j] for j in range(m) if (s >> j) & 1)) for s in range(1 << m)]

    def evaluate(self, word: Sequence[int], assignment: Sequence, group: FiniteGroupBackend) -> Element:
        """
        Left-to-right product of g_|l|^sign(l) over the letters of `word`.

        Args:
            word: signed generator indices, 1-based
            assignment: one raw element per generator, coerced by the backend
            group: backend supplying the arithmetic

        Returns:
            the group element; the identity for the empty word
        """
        return self.evaluate_all([word], assignment, group)[0]

    def evaluate_all(self, words: Sequence[Sequence[int]], assignment: Sequence, group: FiniteGroupBackend) -> List[Element]:
        values = [group.coerce(g) for g in assignment]
        inverses = [group.inverse(g) for g in values]
        results = []
        for word in words:
            result = group.identity
            for letter in word:
                index = abs(letter)
                if letter == 0 or index > len(values):
                    raise InvalidInputError(f"letter {letter} out of range for an assignment of length {len(values)}")
                result = group.multiply(result, values[index - 1] if letter > 0 else inverses[index - 1])
            results.append(result)
        return results

    def substitute(self, word: Sequence[int], images: Sequence[Sequence[int]]) -> Word:
        """Replace x_i by images[i-1] (inverted for negative letters), no reduction."""
        out: List[int] = []
        for letter in word:
            index = abs(letter)
            if letter == 0 or index > len(images):
                raise InvalidInputError(f"letter {letter} out of range for {len(images)} images")
            image = images[index - 1]
            out.extend(image if letter > 0 else self.inverse(image))
        return tuple(out)

    def set_word_map(
        self,
        A: WordSet,
        images: Sequence,
        group: Optional[FiniteGroupBackend] = None,
        rank: Optional[int] = None,
        reduced: bool = True,
        label: Optional[str] = None,
    ) -> Union[WordSet, Tuple[Element, ...]]:
        """
        Substitute images[i] for x_i in every word of A, keeping the order.

        With a group backend the images are elements and a tuple of elements is
        returned; otherwise they are words and a WordSet of the given rank (by
        default the largest index used) comes back.
        """
        if len(images) != A.rank:
            raise InvalidInputError(f"set word map needs {A.rank} images, got {len(images)}")
        if group is not None:
            return tuple(self.evaluate_all(A.words, images, group))

        images = [tuple(int(x) for x in w) for w in images]
        if rank is None:
            rank = max((abs(x) for w in images for x in w), default=1)
        words = []
        for w in A.words:
            image = self.substitute(w, images)
            words.append(self.reduce(image) if reduced else image)
        try:
            return WordSet(rank=rank, words=tuple(words), label=label or f"map({A.label})")
        except ValidationError as e:
            raise InvalidInputError(f"set word map output invalid: {str(e)}")

    def compose(self, A: WordSet, B: WordSet, reduced: bool = True) -> WordSet:
        """The word set whose map is A after B: x_i of A becomes B.words[i-1]."""
        return self.set_word_map(A, B.words, rank=B.rank, reduced=reduced, label=f"{A.label}∘{B.label}")

    def length_stats(self, A: WordSet) -> LengthStats:
        lengths = [len(self.reduce(w)) for w in A.words]
        return LengthStats(max_len=max(lengths), avg_len=Fraction(sum(lengths), len(lengths)))

    def abelianize(self, word: Sequence[int], k: int, p: Optional[int] = None) -> Tuple[int, ...]:
        """Exponent-sum vector of the word, reduced mod p when p is given."""
        vector = [0] * k
        for letter in word:
            if abs(letter) > k:
                raise InvalidInputError(f"letter {letter} out of range for rank {k}")
            vector[abs(letter) - 1] += 1 if letter > 0 else -1
        if p is not None:
            vector = [x % p for x in vector]
        return tuple(vector)

    def dump_wordset(self, A: WordSet, **extra: Any) -> Dict[str, Any]:
        document = WordSetDocument(
            rank=A.rank,
            label=A.label,
            words=[list(w) for w in A.words],
            closure=[ClosureBlockDocument(offset=b.offset, base=[list(w) for w in b.base]) for b in A.closure]
            if A.closure
            else None,
            **extra,
        )
        return document.model_dump(mode="json", exclude_none=True)

    def load_wordset(self, data: Dict[str, Any]) -> WordSet:
        try:
            document = WordSetDocument.model_validate(data)
            closure = None
            if document.closure:
                closure = tuple(
                    ClosureBlock(offset=b.offset, base=tuple(tuple(w) for w in b.base)) for b in document.closure
                )
            return WordSet(
                rank=document.rank,
                words=tuple(tuple(w) for w in document.words),
                label=document.label,
                closure=closure,
            )
        except ValidationError as e:
            logger.error(f"Invalid word set document: {str(e)}")
            raise InvalidInputError(f"invalid word set: {str(e)}")


word_service = WordService()
