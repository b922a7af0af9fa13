#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "coqan/utf8.hpp"

namespace coqan {

enum class Pos {
  other = 0,
  noun,
  verb,
  adjective,
  conjunction,
  pronoun,
  adverb,
  numeral,
  auxiliary,
  idiom,
};

struct Word {
  std::string text;
  std::size_t chars = 0;  // code points
  Pos pos = Pos::other;
};

// Segmented view of a text: words (punctuation excluded) plus the
// punctuation count.
struct Segmentation {
  std::vector<Word> words;
  std::size_t punctuation = 0;
};

// Small bundled word -> POS lexicon. CJK runs are segmented by forward
// longest match; Latin runs are looked up lower-cased; all-digit tokens are
// numerals; everything unlisted is Pos::other.
class Lexicon {
 public:
  static const Lexicon& bundled() {
    static const Lexicon lex = make_bundled();
    return lex;
  }

  void add(std::string word, Pos pos) {
    max_len_ = std::max(max_len_, utf8::decode(word).size());
    pos_[std::move(word)] = pos;
  }
  void add_stop(std::string word) { stop_.insert(std::move(word)); }

  Pos lookup(const std::string& word) const {
    auto it = pos_.find(word);
    return it == pos_.end() ? Pos::other : it->second;
  }
  bool is_stop(const std::string& word) const { return stop_.count(word) > 0; }

  Segmentation segment(std::string_view text) const {
    Segmentation seg;
    const auto cps = utf8::decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
      const char32_t cp = cps[i];
      if (utf8::is_space(cp)) {
        ++i;
        continue;
      }
      if (utf8::is_punct(cp)) {
        ++seg.punctuation;
        ++i;
        continue;
      }
      if (utf8::is_latin_word_char(cp)) {
        std::size_t j = i;
        std::string w;
        bool digits = true;
        while (j < cps.size() && utf8::is_latin_word_char(cps[j])) {
          if (cps[j] < '0' || cps[j] > '9') digits = false;
          utf8::append(w, utf8::ascii_lower(cps[j]));
          ++j;
        }
        Pos p = digits ? Pos::numeral : lookup(w);
        seg.words.push_back({std::move(w), j - i, p});
        i = j;
        continue;
      }
      if (utf8::is_cjk(cp)) {
        std::size_t best = 1;
        const std::size_t limit = std::min(max_len_, cps.size() - i);
        for (std::size_t len = limit; len > 1; --len) {
          bool all_cjk = true;
          for (std::size_t k = 0; k < len; ++k) all_cjk &= utf8::is_cjk(cps[i + k]);
          if (!all_cjk) continue;
          std::string cand = utf8::encode({cps.begin() + i, cps.begin() + i + len});
          if (pos_.count(cand) || stop_.count(cand)) {
            best = len;
            break;
          }
        }
        std::string w = utf8::encode({cps.begin() + i, cps.begin() + i + best});
        Pos p = lookup(w);
        seg.words.push_back({std::move(w), best, p});
        i += best;
        continue;
      }
      // Any other symbol is a one-character word.
      std::string w;
      utf8::append(w, cp);
      seg.words.push_back({std::move(w), 1, Pos::other});
      ++i;
    }
    return seg;
  }

 private:
  static Lexicon make_bundled() {
    Lexicon lex;
    const std::pair<Pos, std::vector<const char*>> table[] = {
        {Pos::noun,
         {"文章", "作者", "图片", "内容", "读者", "时间", "问题", "方法", "世界",
          "城市", "生活", "朋友", "公司", "市场", "技术", "学生", "老师", "孩子",
          "故事", "历史", "文化", "经济", "社会", "健康", "旅行", "美食", "天气",
          "新闻", "视频", "手机", "电影", "音乐", "书", "人", "家", "国家", "水",
          "article", "author", "picture", "image", "content", "reader", "time",
          "problem", "method", "world", "city", "life", "friend", "company",
          "market", "technology", "student", "teacher", "child", "story",
          "history", "culture", "economy", "society", "health", "travel", "food",
          "weather", "news", "video", "phone", "movie", "music", "book", "people",
          "home", "country", "water", "quality", "page", "layout", "section"}},
        {Pos::verb,
         {"是", "有", "说", "看", "写", "读", "去", "来", "做", "学习", "工作",
          "发现", "认为", "喜欢", "需要", "开始", "成为", "提高", "分享", "介绍",
          "is", "are", "was", "were", "be", "have", "has", "say", "says", "see",
          "write", "writes", "read", "reads", "go", "goes", "come", "make", "do",
          "learn", "work", "find", "think", "like", "need", "start", "become",
          "improve", "share", "show", "shows", "use", "uses", "get", "take"}},
        {Pos::adjective,
         {"好", "美丽", "重要", "简单", "清楚", "丰富", "新", "大", "小", "快",
          "漂亮", "有趣", "优秀", "困难", "干净", "good", "beautiful",
          "important", "simple", "clear", "rich", "new", "big", "small", "fast",
          "pretty", "interesting", "excellent", "difficult", "clean", "great",
          "long", "short", "high", "low"}},
        {Pos::conjunction,
         {"和", "但是", "因为", "所以", "而且", "或者", "如果", "虽然", "并且",
          "因此", "and", "but", "because", "so", "or", "if", "although",
          "therefore", "while", "however"}},
        {Pos::pronoun,
         {"我", "你", "他", "她", "它", "我们", "你们", "他们", "这", "那", "自己",
          "i", "you", "he", "she", "it", "we", "they", "this", "that", "me",
          "him", "her", "us", "them"}},
        {Pos::adverb,
         {"很", "非常", "都", "也", "就", "还", "已经", "不", "再", "最", "更",
          "very", "also", "already", "not", "again", "most", "more", "often",
          "always", "never", "really", "quickly"}},
        {Pos::numeral,
         {"一", "二", "三", "四", "五", "六", "七", "八", "九", "十", "百", "千",
          "万", "one", "two", "three", "four", "five", "six", "seven", "eight",
          "nine", "ten", "hundred", "thousand"}},
        {Pos::auxiliary,
         {"的", "了", "着", "过", "地", "得", "吗", "呢", "吧", "啊", "to", "of",
          "will", "would", "can", "could", "should", "must", "may", "might"}},
        {Pos::idiom,
         {"一举两得", "画蛇添足", "守株待兔", "自相矛盾", "井底之蛙", "对牛弹琴",
          "半途而废", "亡羊补牢", "一石二鸟", "锦上添花", "事半功倍", "与众不同"}},
    };
    for (const auto& [pos, words] : table) {
      for (const char* w : words) lex.add(w, pos);
    }
    const char* stops[] = {"的", "了", "是", "在", "和", "也", "就", "都",
                           "而", "及", "与", "着", "或", "一个", "我们", "这",
                           "那", "有", "为", "之", "the", "a", "an", "of",
                           "and", "to", "in", "is", "are", "was", "it", "on",
                           "for", "with", "as", "at", "by", "this", "that",
                           "be", "or", "from"};
    for (const char* s : stops) lex.add_stop(s);
    return lex;
  }

  std::unordered_map<std::string, Pos> pos_;
  std::unordered_set<std::string> stop_;
  std::size_t max_len_ = 1;
};

}  // namespace coqan
