#include "kval/chunker.hpp"

#include <unordered_set>

namespace kval {

namespace lexicon {
namespace {

using Set = std::unordered_set<std::string_view>;

const Set kWh = {"which", "what", "who", "whom", "whose", "where", "when", "why", "how"};

const Set kDeterminers = {"a", "an", "the", "this", "that", "these", "those",
                          "some", "any", "each", "every", "no", "all", "both"};

const Set kPossessives = {"his", "her", "its", "their", "my", "our", "your"};

const Set kPronouns = {"he", "she", "it", "they", "them", "him", "i", "we",
                       "you", "us", "me", "one", "someone", "something",
                       "anything", "everything"};

const Set kQuantifiers = {"many", "much", "few", "several", "more", "most"};

const Set kPrepositions = {"of", "in", "on", "at", "to", "for", "with", "from",
                           "by", "about", "over", "under", "near", "behind",
                           "during", "inside", "outside", "between", "through",
                           "around", "across", "above", "below"};

const Set kAttaching = {"of", "in", "on", "with"};

const Set kConjunctions = {"and", "or", "but", "nor", "so", "yet", "if", "because"};

const Set kAuxiliaries = {
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does",
    "did", "done", "has", "have", "had", "having", "can", "could", "will",
    "would", "shall", "should", "may", "might", "must", "wont", "cant",
    "dont", "doesnt", "isnt", "arent", "didnt", "wasnt", "werent"};

const Set kAdverbs = {"not", "very", "too", "also", "often", "usually",
                      "typically", "here", "there", "now", "then", "only",
                      "just", "likely", "probably", "commonly", "normally",
                      "mostly", "currently"};

// Common verbs of picture-description questions. Open-ended by nature; the
// list covers the forms the shipped fixtures and tests rely on.
const Set kVerbs = {
    "features",   "feature",   "featured",  "featuring", "tell",
    "tells",      "telling",   "told",      "call",      "calls",
    "called",     "calling",   "named",     "naming",
    "show",       "shows",     "showing",   "shown",     "make",
    "makes",      "making",    "made",      "use",       "uses",
    "using",      "used",      "see",       "sees",      "seeing",
    "seen",       "look",      "looks",     "looking",   "find",
    "finds",      "finding",   "found",     "eat",       "eats",
    "eating",     "eaten",     "drinking",  "drank",
    "play",       "plays",     "playing",   "played",    "wear",
    "wears",      "wearing",   "worn",      "hold",      "holds",
    "holding",    "held",      "stand",     "stands",    "standing",
    "stood",      "sit",       "sits",      "sitting",   "sat",
    "ride",       "rides",     "riding",    "ridden",    "fly",
    "flies",      "flying",    "flew",      "grow",      "grows",
    "growing",    "grown",     "live",      "lives",     "living",
    "lived",      "come",      "comes",     "coming",    "came",
    "go",         "goes",      "going",     "went",      "get",
    "gets",       "getting",   "got",       "take",      "takes",
    "taking",     "took",      "keep",      "keeps",     "keeping",
    "kept",       "know",      "knows",     "knowing",   "knew",
    "think",      "thinks",    "thinking",  "thought",   "belong",
    "belongs",    "belonged",  "invent",    "invented",  "produce",
    "produces",   "produced",  "win",       "wins",      "winning",
    "won",        "happen",    "happens",   "happened",  "appear",
    "appears",    "appeared",  "refer",     "refers",    "referred",
    "originate",  "originates", "originated", "pictured", "depicted",
    "located",    "serve",     "serves",    "served",    "serving",
    "pull",       "pulls",     "pulling",   "pulled",    "perform",
    "performs",   "performed", "need",      "needs",     "needed",
    "weigh",      "weighs",    "weighed",   "contain",   "contains"};

}  // namespace

bool is_wh(std::string_view w) { return kWh.count(w) > 0; }
bool is_determiner(std::string_view w) { return kDeterminers.count(w) > 0; }
bool is_possessive(std::string_view w) { return kPossessives.count(w) > 0; }
bool is_pronoun(std::string_view w) { return kPronouns.count(w) > 0; }
bool is_quantifier(std::string_view w) { return kQuantifiers.count(w) > 0; }
bool is_preposition(std::string_view w) { return kPrepositions.count(w) > 0; }
bool is_conjunction(std::string_view w) { return kConjunctions.count(w) > 0; }
bool is_auxiliary(std::string_view w) { return kAuxiliaries.count(w) > 0; }
bool is_adverb(std::string_view w) { return kAdverbs.count(w) > 0; }
bool is_common_verb(std::string_view w) { return kVerbs.count(w) > 0; }
bool is_attaching_preposition(std::string_view w) { return kAttaching.count(w) > 0; }

bool is_noun_candidate(std::string_view w) {
  return !(is_wh(w) || is_determiner(w) || is_possessive(w) || is_pronoun(w) ||
           is_quantifier(w) || is_preposition(w) || is_conjunction(w) ||
           is_auxiliary(w) || is_adverb(w) || is_common_verb(w));
}

}  // namespace lexicon

namespace {

using lexicon::is_attaching_preposition;
using lexicon::is_determiner;
using lexicon::is_noun_candidate;
using lexicon::is_possessive;
using lexicon::is_quantifier;
using lexicon::is_wh;

bool starts_phrase(const std::vector<Token>& t, int i) {
  const auto& w = t[static_cast<std::size_t>(i)].surface;
  if (is_noun_candidate(w)) return true;
  if ((is_determiner(w) || is_possessive(w)) &&
      i + 1 < static_cast<int>(t.size()) &&
      is_noun_candidate(t[static_cast<std::size_t>(i + 1)].surface))
    return true;
  return false;
}

// Consumes `prep (det|poss)? noun+` tails starting at i; returns the new end.
int extend_attachments(const std::vector<Token>& t, int i) {
  const int n = static_cast<int>(t.size());
  while (i < n && is_attaching_preposition(t[static_cast<std::size_t>(i)].surface)) {
    int j = i + 1;
    if (j < n && (is_determiner(t[static_cast<std::size_t>(j)].surface) ||
                  is_possessive(t[static_cast<std::size_t>(j)].surface)))
      ++j;
    int k = j;
    while (k < n && is_noun_candidate(t[static_cast<std::size_t>(k)].surface)) ++k;
    if (k == j) break;  // bare preposition, not an attachment
    i = k;
  }
  return i;
}

}  // namespace

ChunkResult RuleBasedChunker::parse(const std::vector<Token>& tokens) const {
  ChunkResult result;
  const int n = static_cast<int>(tokens.size());

  int target_begin = -1, target_end = -1;
  for (int i = 0; i < n; ++i) {
    if (!is_wh(tokens[static_cast<std::size_t>(i)].surface)) continue;
    int run_end = i + 1;
    while (run_end < n &&
           (is_quantifier(tokens[static_cast<std::size_t>(run_end)].surface) ||
            is_noun_candidate(tokens[static_cast<std::size_t>(run_end)].surface)))
      ++run_end;
    PhraseSpan span;
    span.begin = i;
    span.head = run_end > i + 1 ? run_end - 1 : i;  // bare wh heads itself
    span.end = run_end > i + 1 ? extend_attachments(tokens, run_end) : run_end;
    result.target = span;
    target_begin = span.begin;
    target_end = span.end;
    break;
  }

  for (int i = 0; i < n;) {
    if (i >= target_begin && i < target_end) {
      i = target_end;
      continue;
    }
    if (!starts_phrase(tokens, i)) {
      ++i;
      continue;
    }
    PhraseSpan span;
    span.begin = i;
    int j = i;
    if (is_determiner(tokens[static_cast<std::size_t>(j)].surface) ||
        is_possessive(tokens[static_cast<std::size_t>(j)].surface))
      ++j;
    int run_start = j;
    while (j < n && is_noun_candidate(tokens[static_cast<std::size_t>(j)].surface) &&
           !(j >= target_begin && j < target_end))
      ++j;
    if (j == run_start) {  // determiner with no noun after all
      ++i;
      continue;
    }
    span.head = j - 1;
    span.end = extend_attachments(tokens, j);
    result.phrases.push_back(span);
    i = span.end;
  }
  return result;
}

}  // namespace kval
