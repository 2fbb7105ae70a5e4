#ifndef LOGDAG_H
#define LOGDAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum LogdagStatus {
  LOGDAG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LOGDAG_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LOGDAG_STATUS_INVALID_UTF8 = 2,
  /**
   * The configuration text was rejected.
   */
  LOGDAG_STATUS_INVALID_CONFIG = 3,
  /**
   * The state snapshot could not be read or was inconsistent.
   */
  LOGDAG_STATUS_INVALID_STATE = 4,
  /**
   * The line did not fit the configured line format and was skipped.
   */
  LOGDAG_STATUS_MALFORMED_LINE = 5,
  /**
   * No output node has the requested id.
   */
  LOGDAG_STATUS_UNKNOWN_TEMPLATE = 6,
  /**
   * A Rust panic was caught at the boundary; the parser should be freed.
   */
  LOGDAG_STATUS_INTERNAL = 7,
} LogdagStatus;

/**
 * Opaque parser handle.
 */
typedef struct LogdagParser LogdagParser;

/**
 * One parsed line.
 */
typedef struct LogdagRecord {
  uint64_t line_id;
  uint64_t group_id;
  uint64_t output_id;
} LogdagRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a parser.
 *
 * `config_toml` holds configuration in the same TOML form the CLI reads;
 * null selects the defaults. The member-id lists are not kept, so memory
 * stays proportional to the number of templates.
 *
 * # Safety
 *
 * `config_toml` is null or a NUL-terminated string. `out` is a valid
 * pointer to writable storage for one handle.
 */
enum LogdagStatus logdag_parser_new(const char *config_toml, struct LogdagParser **out);

/**
 * Creates a parser that continues from a snapshot taken with
 * [`logdag_parser_snapshot`]. Graph settings come from the snapshot;
 * `config_toml` supplies the preprocessing rules and line format.
 *
 * # Safety
 *
 * `config_toml` is null or NUL-terminated; `state_json` is NUL-terminated;
 * `out` is valid for one write.
 */
enum LogdagStatus logdag_parser_restore(const char *config_toml,
                                        const char *state_json,
                                        struct LogdagParser **out);

/**
 * Releases a parser. Null is ignored.
 *
 * # Safety
 *
 * `parser` is null or a handle from this library that has not been freed.
 */
void logdag_parser_free(struct LogdagParser *parser);

/**
 * Parses one raw log line (without its terminator).
 *
 * On [`LogdagStatus::Ok`] the record is written to `out`. A line that does
 * not fit the line format yields [`LogdagStatus::MalformedLine`] and leaves
 * the parser usable.
 *
 * # Safety
 *
 * `parser` is a live handle, `line` is NUL-terminated, and `out` is valid
 * for one write. A handle must not be used from two threads at once.
 */
enum LogdagStatus logdag_parser_feed(struct LogdagParser *parser,
                                     const char *line,
                                     struct LogdagRecord *out);

/**
 * Number of output nodes (templates) so far. Output ids run from 1 to
 * this count. Returns 0 for a null handle.
 *
 * # Safety
 *
 * `parser` is null or a live handle.
 */
uint64_t logdag_parser_template_count(const struct LogdagParser *parser);

/**
 * Number of lines parsed so far. Returns 0 for a null handle.
 *
 * # Safety
 *
 * `parser` is null or a live handle.
 */
uint64_t logdag_parser_lines_parsed(const struct LogdagParser *parser);

/**
 * Writes the current template text of output node `output_id` to `*out`.
 * Release it with [`logdag_string_free`].
 *
 * # Safety
 *
 * `parser` is a live handle; `out` is valid for one write.
 */
enum LogdagStatus logdag_parser_template(const struct LogdagParser *parser,
                                         uint64_t output_id,
                                         char **out);

/**
 * Serializes the parser's graph as JSON to `*out`, for
 * [`logdag_parser_restore`]. Release it with [`logdag_string_free`].
 *
 * # Safety
 *
 * `parser` is a live handle; `out` is valid for one write.
 */
enum LogdagStatus logdag_parser_snapshot(const struct LogdagParser *parser, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 *
 * `s` is null or a string from this library that has not been freed.
 */
void logdag_string_free(char *s);

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread;
 * do not free it.
 */
const char *logdag_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *logdag_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGDAG_H */
