// Token normalization mirrors the core library exactly: lowercase, word
// characters grouped, punctuation split into single tokens.
const TOKEN_RE = /[\p{L}\p{N}_]+|[^\p{L}\p{N}_\s]/gu;

export function normalizeTokens(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

export function buildLabelSentence(entityName: string, labels: string[]): string {
  if (labels.length === 0) {
    throw new Error("label sentence needs a non-empty vocabulary");
  }
  return `${entityName} is ${labels.join(", ")}.`;
}

export const TASK_LABELS: Record<string, string[]> = {
  maslow: ["esteem", "love", "physiological", "spiritual growth", "stability"],
  reiss: [
    "approval", "belonging", "competition", "contact", "curiosity", "family",
    "food", "health", "honor", "idealism", "independence", "order", "power",
    "rest", "romance", "savings", "serenity", "status", "tranquility",
  ],
  plutchik: [
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise",
    "trust",
  ],
  desire: ["fulfilled", "unfulfilled"],
  sentiment: ["negative", "neutral", "positive"],
};
