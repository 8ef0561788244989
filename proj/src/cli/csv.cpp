#include <fstream>
#include <istream>
#include <iterator>

#include "isocrit/cli.hpp"

namespace isocrit::cli {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw CliError(kExitBadInput, "missing column '" + name + "'");
}

CsvTable read_csv(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

  enum class State { FieldStart, Unquoted, Quoted, AfterQuote };
  State state = State::FieldStart;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const char c = text[pos];
    // CRLF line endings: drop the CR outside quotes
    if (c == '\r' && state != State::Quoted && pos + 1 < text.size() && text[pos + 1] == '\n') {
      continue;
    }
    switch (state) {
      case State::FieldStart:
      case State::Unquoted:
        if (c == '"' && state == State::FieldStart) {
          state = State::Quoted;
        } else if (c == ',') {
          end_field();
          state = State::FieldStart;
        } else if (c == '\n') {
          end_record();
          ++line;
          state = State::FieldStart;
        } else {
          field += c;
          state = State::Unquoted;
        }
        break;
      case State::Quoted:
        if (c == '"') {
          state = State::AfterQuote;
        } else {
          if (c == '\n') ++line;
          field += c;
        }
        break;
      case State::AfterQuote:
        if (c == '"') {
          field += '"';
          state = State::Quoted;
        } else if (c == ',') {
          end_field();
          state = State::FieldStart;
        } else if (c == '\n') {
          end_record();
          ++line;
          state = State::FieldStart;
        } else {
          throw CliError(kExitBadInput,
                         "malformed CSV: text after closing quote on line " + std::to_string(line));
        }
        break;
    }
  }
  if (state == State::Quoted) {
    throw CliError(kExitBadInput, "malformed CSV: unterminated quoted field");
  }
  if (state != State::FieldStart || !record.empty() || !field.empty()) end_record();

  if (records.empty()) throw CliError(kExitBadInput, "empty CSV input");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw CliError(kExitBadInput, "CSV row " + std::to_string(r) + " has " +
                                        std::to_string(records[r].size()) + " fields, header has " +
                                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(kExitBadInput, "cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace isocrit::cli
