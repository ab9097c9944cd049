...
from scipy import stats
...
# Statistical testing
t_stat, p_val = stats.ttest_ind(general_lengths, specific_lengths)

# Result interpretation
if p_val < 0.05:
    print("The specificity of a question prompt directly influences the conciseness of the response.")
else:
    print("The specificity of a question prompt does not directly influence the conciseness of the response.")
