#ifndef OCRBENCH_H
#define OCRBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OcrbAccuracyClass {
  OCRB_ACCURACY_CLASS_GOOD = 0,
  OCRB_ACCURACY_CLASS_AVERAGE = 1,
  OCRB_ACCURACY_CLASS_POOR = 2,
} OcrbAccuracyClass;

typedef enum OcrbStatus {
  OCRB_STATUS_OK = 0,
  OCRB_STATUS_NULL_POINTER = 1,
  OCRB_STATUS_INVALID_UTF8 = 2,
  OCRB_STATUS_INVALID_ARGUMENT = 3,
  OCRB_STATUS_IO = 4,
  OCRB_STATUS_EMPTY_REFERENCE = 5,
  OCRB_STATUS_EMPTY_MODEL = 6,
  OCRB_STATUS_UNREACHABLE = 7,
  OCRB_STATUS_FORMAT = 8,
  OCRB_STATUS_ENGINE = 9,
  OCRB_STATUS_OTHER = 10,
  OCRB_STATUS_PANIC = 11,
} OcrbStatus;

/*
 Opaque error model.
 */
typedef struct OcrbErrorModel OcrbErrorModel;

/*
 Opaque incremental miner.
 */
typedef struct OcrbMiner OcrbMiner;

/*
 Field values: `unicode_form` 0 = NFC, 1 = none; `unit` 0 = code point,
 1 = grapheme cluster; `whitespace` 0 = preserve, 1 = collapse runs.
 */
typedef struct OcrbPolicy {
  uint32_t unicode_form;
  uint32_t unit;
  uint32_t whitespace;
} OcrbPolicy;

typedef struct OcrbCerReport {
  size_t distance;
  size_t ref_len;
  size_t hyp_len;
  size_t substitutions;
  size_t insertions;
  size_t deletions;
  /*
   Percent.
   */
  double cer;
} OcrbCerReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or NULL. Valid until the
 next failing call on the same thread; do not free.
 */
const char *ocrb_last_error(void);

/*
 Release a string returned by this library.

 # Safety
 `s` must be NULL or a string returned by this library, freed once.
 */
void ocrb_string_free(char *s);

/*
 Levenshtein distance between the normalized unit sequences.

 # Safety
 String arguments must be NULL or NUL-terminated; `policy` may be NULL
 for the default; `out_distance` must be writable.
 */
enum OcrbStatus ocrb_edit_distance(const char *reference,
                                   const char *hypothesis,
                                   const struct OcrbPolicy *policy,
                                   size_t *out_distance);

/*
 Character error rate in percent, with operation counts.

 # Safety
 As for [`ocrb_edit_distance`]; `out` must be writable.
 */
enum OcrbStatus ocrb_cer(const char *reference,
                         const char *hypothesis,
                         const struct OcrbPolicy *policy,
                         struct OcrbCerReport *out);

/*
 Accuracy band for a CER in percent: Good <= 2 < Average <= 10 < Poor.
 */
enum OcrbAccuracyClass ocrb_classify(double cer);

/*
 # Safety
 `policy` may be NULL for the default.
 */
enum OcrbStatus ocrb_miner_new(const struct OcrbPolicy *policy, struct OcrbMiner **out_miner);

/*
 Align one pair and add its errors to the miner.

 # Safety
 `miner` must be a live handle; strings NUL-terminated.
 */
enum OcrbStatus ocrb_miner_add_pair(struct OcrbMiner *miner,
                                    const char *reference,
                                    const char *hypothesis);

/*
 Consume the miner and produce a model. The miner handle is invalid
 afterwards, whatever the status.

 # Safety
 `miner` must be a live handle; `language` NUL-terminated.
 */
enum OcrbStatus ocrb_miner_finish(struct OcrbMiner *miner,
                                  const char *language,
                                  struct OcrbErrorModel **out_model);

/*
 # Safety
 `miner` must be NULL or a live handle.
 */
void ocrb_miner_free(struct OcrbMiner *miner);

/*
 # Safety
 `path` NUL-terminated; `out_model` writable.
 */
enum OcrbStatus ocrb_model_load(const char *path, struct OcrbErrorModel **out_model);

/*
 # Safety
 `json` NUL-terminated; `out_model` writable.
 */
enum OcrbStatus ocrb_model_from_json(const char *json, struct OcrbErrorModel **out_model);

/*
 ASCII-only JSON; free with [`ocrb_string_free`].

 # Safety
 `model` must be a live handle; `out_json` writable.
 */
enum OcrbStatus ocrb_model_to_json(const struct OcrbErrorModel *model, char **out_json);

/*
 Number of entries; 0 for NULL.

 # Safety
 `model` must be NULL or a live handle.
 */
size_t ocrb_model_len(const struct OcrbErrorModel *model);

/*
 New model holding the `k` most frequent entries.

 # Safety
 `model` must be a live handle; `out_model` writable.
 */
enum OcrbStatus ocrb_model_top_k(const struct OcrbErrorModel *model,
                                 size_t k,
                                 struct OcrbErrorModel **out_model);

/*
 # Safety
 `model` must be NULL or a live handle.
 */
void ocrb_model_free(struct OcrbErrorModel *model);

/*
 Noise `text` to `target_cer` percent. `kinds` is a bit set: 1 insert,
 2 delete, 4 substitute. `out_achieved_cer` may be NULL.

 # Safety
 `text` NUL-terminated; `model` live; `policy` may be NULL; `out_text`
 writable.
 */
enum OcrbStatus ocrb_inject(const char *text,
                            const struct OcrbErrorModel *model,
                            double target_cer,
                            uint8_t kinds,
                            uint64_t seed,
                            const struct OcrbPolicy *policy,
                            char **out_text,
                            double *out_achieved_cer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCRBENCH_H */
