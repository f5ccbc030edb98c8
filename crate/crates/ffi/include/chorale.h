#ifndef CHORALE_H
#define CHORALE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ChoraleStatus {
  CHORALE_STATUS_OK = 0,
  // A required pointer was null.
  CHORALE_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not UTF-8.
  CHORALE_STATUS_INVALID_UTF8 = 2,
  CHORALE_STATUS_IO = 3,
  // Unreadable or unsupported MusicXML.
  CHORALE_STATUS_INGEST = 4,
  // Corrupt model file or a model/score mismatch.
  CHORALE_STATUS_MODEL = 5,
  // Impossible constraints or sampler configuration.
  CHORALE_STATUS_SAMPLER = 6,
  // A score breaking a structural invariant.
  CHORALE_STATUS_INVALID = 7,
  // A failure inside the library itself.
  CHORALE_STATUS_INTERNAL = 8,
} ChoraleStatus;

// Trained per-voice conditionals.
typedef struct ChoraleModel ChoraleModel;

// A four-voice score with its metadata.
typedef struct ChoraleScore ChoraleScore;

// Bytes allocated by this library.
typedef struct ChoraleBuffer {
  uint8_t *data;
  size_t len;
} ChoraleBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *chorale_version(void);

// Message of the last failed call on this thread, or null after a success.
// The pointer is valid until the next call into this library.
const char *chorale_last_error_message(void);

// Loads a model file written by `chorale train`.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum ChoraleStatus chorale_model_load(const char *path, struct ChoraleModel **out);

// Loads a model from the bytes of a model file.
//
// # Safety
// `data` points to `len` readable bytes; `out` is writable.
enum ChoraleStatus chorale_model_load_bytes(const uint8_t *data,
                                            size_t len,
                                            struct ChoraleModel **out);

// # Safety
// `model` is null or a handle from this library not yet freed.
void chorale_model_free(struct ChoraleModel *model);

// Parses a four-part MusicXML document.
//
// # Safety
// `data` points to `len` readable bytes; `out` is writable.
enum ChoraleStatus chorale_score_parse_musicxml(const uint8_t *data,
                                                size_t len,
                                                struct ChoraleScore **out);

// Reads a score document (the JSON form served over HTTP).
//
// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum ChoraleStatus chorale_score_from_json(const char *json, struct ChoraleScore **out);

// # Safety
// `score` is null or a handle from this library not yet freed.
void chorale_score_free(struct ChoraleScore *score);

// Length in sixteenth-note ticks; 0 for a null handle.
//
// # Safety
// `score` is null or a live handle.
size_t chorale_score_length(const struct ChoraleScore *score);

// # Safety
// `score` is a live handle; `out` is writable.
enum ChoraleStatus chorale_score_export_musicxml(const struct ChoraleScore *score,
                                                 struct ChoraleBuffer *out);

// # Safety
// `score` is a live handle; `out` is writable.
enum ChoraleStatus chorale_score_export_midi(const struct ChoraleScore *score,
                                             struct ChoraleBuffer *out);

// The score as a JSON document, UTF-8 without a terminator.
//
// # Safety
// `score` is a live handle; `out` is writable.
enum ChoraleStatus chorale_score_to_json(const struct ChoraleScore *score,
                                         struct ChoraleBuffer *out);

// # Safety
// `buffer` is null or was filled by this library and not yet freed.
void chorale_buffer_free(struct ChoraleBuffer *buffer);

// Samples a chorale of `length` ticks from scratch. `iterations = 0` means
// 100 updates per cell; `fermata_every = 0` means no fermatas, otherwise
// one closes every n-th bar.
//
// # Safety
// `model` is a live handle; `out` is writable.
enum ChoraleStatus chorale_sample(const struct ChoraleModel *model,
                                  size_t length,
                                  uint64_t seed,
                                  size_t iterations,
                                  size_t fermata_every,
                                  int8_t key_signature,
                                  struct ChoraleScore **out);

// Keeps the first part of a MusicXML document as soprano and samples the
// lower voices.
//
// # Safety
// `model` is a live handle; `melody` points to `len` readable bytes; `out`
// is writable.
enum ChoraleStatus chorale_reharmonize(const struct ChoraleModel *model,
                                       const uint8_t *melody,
                                       size_t len,
                                       uint64_t seed,
                                       size_t iterations,
                                       struct ChoraleScore **out);

// Checks a score against the model's encoding and vocabularies.
//
// # Safety
// Both handles are live.
enum ChoraleStatus chorale_score_check(const struct ChoraleModel *model,
                                       const struct ChoraleScore *score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHORALE_H */
