#pragma once

#include "kval/text.hpp"

#include <optional>
#include <vector>

namespace kval {

namespace lexicon {

bool is_wh(std::string_view word);        // which, what, ..., how
bool is_determiner(std::string_view word);
bool is_possessive(std::string_view word);
bool is_pronoun(std::string_view word);
bool is_quantifier(std::string_view word);
bool is_preposition(std::string_view word);
bool is_conjunction(std::string_view word);
bool is_auxiliary(std::string_view word);
bool is_adverb(std::string_view word);
bool is_common_verb(std::string_view word);

/// Prepositions whose following noun run is folded into the current phrase
/// ("man in this position"); others ("to strangers") start a new phrase.
bool is_attaching_preposition(std::string_view word);

/// Open-class token: not in any closed list above. These are the noun
/// candidates of the rule-based chunker.
bool is_noun_candidate(std::string_view word);

}  // namespace lexicon

struct PhraseSpan {
  int begin = 0;  // token ordinal, inclusive
  int end = 0;    // token ordinal, exclusive
  int head = 0;   // ordinal of the head token (last noun of the base run)
};

struct ChunkResult {
  std::optional<PhraseSpan> target;  // the wh/how phrase, when present
  std::vector<PhraseSpan> phrases;   // remaining noun phrases, left to right
};

/// Splits token sequences into noun phrases. Implementations must be
/// deterministic; a trained parser can be substituted behind this interface.
class PhraseChunker {
 public:
  virtual ~PhraseChunker() = default;
  virtual ChunkResult parse(const std::vector<Token>& tokens) const = 0;
};

/// Closed-class word lists plus maximal noun-run detection. A phrase is an
/// optional determiner/possessive, a run of open-class tokens, and any
/// attaching prepositional tails. The head is the last token of the base run.
class RuleBasedChunker final : public PhraseChunker {
 public:
  ChunkResult parse(const std::vector<Token>& tokens) const override;
};

}  // namespace kval
