...
# Initialize OpenAI
openai.api_key = 'your-api-key'
...
