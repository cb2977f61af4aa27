#pragma once

#include <string_view>
#include <unordered_set>

namespace storyline {

/// Bumped whenever either list changes; persisted indexes record it.
inline constexpr int kWordListVersion = 1;

inline const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
        "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
        "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
        "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
        "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
        "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
        "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
        "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
        "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
        "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
        "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
        "yourselves", "s", "t", "don", "rt", "via", "amp",
    };
    return words;
}

/// Frequent English content words; together with the stopwords these drive
/// the English-text check.
inline const std::unordered_set<std::string_view>& common_english_words() {
    static const std::unordered_set<std::string_view> words = {
        "time", "year", "people", "way", "day", "man", "woman", "thing", "life", "child", "world",
        "school", "state", "family", "student", "group", "country", "problem", "hand", "part",
        "place", "case", "week", "company", "system", "program", "question", "work", "government",
        "number", "night", "point", "home", "water", "room", "mother", "area", "money", "story",
        "fact", "month", "lot", "right", "study", "book", "eye", "job", "word", "business", "issue",
        "side", "kind", "head", "house", "service", "friend", "father", "power", "hour", "game",
        "line", "end", "member", "law", "car", "city", "community", "name", "president", "team",
        "minute", "idea", "kid", "body", "information", "back", "parent", "face", "others", "level",
        "office", "door", "health", "person", "art", "war", "history", "party", "result", "change",
        "morning", "reason", "research", "girl", "guy", "moment", "air", "teacher", "force",
        "education", "be", "have", "say", "get", "make", "go", "know", "take", "see", "come",
        "think", "look", "want", "give", "use", "find", "tell", "ask", "seem", "feel", "try",
        "leave", "call", "good", "new", "first", "last", "long", "great", "little", "old", "big",
        "high", "different", "small", "large", "next", "early", "young", "important", "public",
        "bad", "able", "best", "better", "sure", "free", "full", "real", "today", "tonight",
        "tomorrow", "yesterday", "live", "love", "like", "watch", "show", "music", "dance", "race",
        "stage", "final", "win", "won", "winner", "first", "second", "third", "news", "photo",
        "picture", "video", "great", "amazing", "beautiful", "happy", "thanks", "thank", "well",
        "also", "still", "even", "never", "always", "ever", "really", "much", "many", "every",
        "again", "around", "another", "festival", "tour", "street", "crowd", "fans", "view",
        "night", "open", "start", "started", "finish", "finished", "week", "weekend", "road",
        "performance", "performers", "theatre", "theater", "opera", "comedy", "fringe", "cycling",
        "rider", "riders", "mountain", "climb", "sun", "rain", "weather", "castle", "red", "yellow",
        "green", "blue", "white", "black", "light", "dark", "big", "top", "way", "got", "going",
        "gone", "went", "made", "see", "seen", "saw", "one", "two", "three", "four", "five", "ten",
        "here", "look", "looking", "back", "off", "come", "coming", "way", "far", "near", "best",
        "city", "town", "people", "team", "time", "year", "years", "day", "days", "let", "lets",
        "may", "might", "must", "shall", "us", "yes", "oh", "wow", "man", "woman", "men", "women",
        "check", "out", "join", "meet", "read", "play", "played", "playing", "set", "ready", "every",
    };
    return words;
}

inline bool is_english_word(std::string_view w) {
    return stopwords().contains(w) || common_english_words().contains(w);
}

}  // namespace storyline
