/** Definition text shown in the dimension banner. */

export const PAIRWISE_DEFINITIONS: Record<string, string> = {
  specificity:
    'Specificity: the feedback includes explicit references to relevant parts ' +
    "of the student's essay.",
  helpfulness:
    'Helpfulness: the feedback provides actionable guidance that supports ' +
    "the student's improvement.",
  validity:
    "Validity: the feedback accurately diagnoses the quality of the student's " +
    'essay based on the rubric score descriptions.',
  revision:
    'Pick the revised essay that improved more over the original.',
};

/** Likert scales, in server order d1..d3. */
export const LIKERT_DEFINITIONS: Record<string, string> = {
  d1: 'Faithfulness to essay (D1): does the feedback adequately and accurately reflect the content of the essay?',
  d2: 'Usefulness for revision (D2): does the feedback sufficiently address areas for improvement?',
  d3: 'Rubric alignment (D3): is the feedback grounded in the rubric?',
};

export function definitionFor(kind: string, dimension: string): string {
  if (kind === 'revision_pairwise') {
    return PAIRWISE_DEFINITIONS.revision;
  }
  return PAIRWISE_DEFINITIONS[dimension] ?? dimension;
}
